//! Quantitative scaffolding for inspecting trained embeddings: top-K
//! retrieval of variables around a shared embedding, Subject-Area scoring,
//! the random-choice baseline, the commonly-shared-embedding report and the
//! stable rank of `S`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::entmax::AttentionKernel;
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, stable_rank, Matrix, Rng};
use crate::shared_embeddings::{attend, EmbeddingStore};
use crate::task_data::{SubjectArea, TaskBundle};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_SHARING_THRESHOLD: f64 = 0.1;
pub const DEFAULT_TOP_N: usize = 5;

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("cosine of vectors of length {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub task_id: usize,
    pub position: usize,
    pub global_index: usize,
    pub dataset: String,
    pub subject_area: SubjectArea,
    pub description: Option<String>,
    /// Absent for random-baseline draws.
    pub cosine: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominantArea {
    pub area: SubjectArea,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    /// Absent for random-baseline draws.
    pub shared_index: Option<usize>,
    pub records: Vec<SimilarityRecord>,
    pub dominant_sa: DominantArea,
    pub n_subject_areas: usize,
    pub n_distinct_datasets: usize,
}

impl TrialReport {
    fn from_records(shared_index: Option<usize>, records: Vec<SimilarityRecord>) -> Self {
        // Most frequent area; ties go to the area met first in rank order.
        let mut counts: Vec<(SubjectArea, usize)> = Vec::new();
        for r in &records {
            match counts.iter_mut().find(|(a, _)| *a == r.subject_area) {
                Some((_, c)) => *c += 1,
                None => counts.push((r.subject_area, 1)),
            }
        }
        let mut dominant = counts[0];
        for &(a, c) in &counts[1..] {
            if c > dominant.1 {
                dominant = (a, c);
            }
        }
        let datasets: HashSet<usize> = records.iter().map(|r| r.task_id).collect();
        TrialReport {
            shared_index,
            n_subject_areas: counts.len(),
            n_distinct_datasets: datasets.len(),
            dominant_sa: DominantArea {
                area: dominant.0,
                count: dominant.1,
            },
            records,
        }
    }

    /// Share of the records that belong to the dominant area.
    pub fn purity(&self) -> f64 {
        self.dominant_sa.count as f64 / self.records.len() as f64
    }
}

/// Integer totals plus derived means over a set of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub k: usize,
    pub total_dominant_count: usize,
    pub total_subject_areas: usize,
    pub total_distinct_datasets: usize,
    /// Trials whose dominant area holds a strict majority of the records.
    pub majority_trials: usize,
    pub mean_purity: f64,
    pub mean_subject_areas: f64,
    pub majority_rate: f64,
}

pub fn summarize(trials: &[TrialReport]) -> TrialSummary {
    let n = trials.len();
    let k = trials.first().map_or(0, |t| t.records.len());
    let total_dominant_count = trials.iter().map(|t| t.dominant_sa.count).sum();
    let total_subject_areas = trials.iter().map(|t| t.n_subject_areas).sum();
    let total_distinct_datasets = trials.iter().map(|t| t.n_distinct_datasets).sum();
    let majority_trials = trials.iter().filter(|t| 2 * t.dominant_sa.count > t.records.len()).count();
    let denom = n.max(1) as f64;
    TrialSummary {
        trials: n,
        k,
        total_dominant_count,
        total_subject_areas,
        total_distinct_datasets,
        majority_trials,
        mean_purity: trials.iter().map(TrialReport::purity).sum::<f64>() / denom,
        mean_subject_areas: total_subject_areas as f64 / denom,
        majority_rate: majority_trials as f64 / denom,
    }
}

fn record(bundle: &TaskBundle, global: usize, cosine: Option<f64>) -> SimilarityRecord {
    let (task_id, position) = bundle.variable_of(global);
    let spec = &bundle.task(task_id).spec;
    SimilarityRecord {
        task_id,
        position,
        global_index: global,
        dataset: spec.name.clone(),
        subject_area: spec.subject_area,
        description: spec.variable_descriptions.as_ref().map(|d| d[position].clone()),
        cosine,
    }
}

/// Processed embeddings of every observed variable, `N × C`.
pub fn processed_all(store: &EmbeddingStore, kernel: &AttentionKernel) -> Result<Matrix> {
    let rows: Vec<usize> = (0..store.z.rows()).collect();
    Ok(attend(store, &rows, kernel)?.f)
}

fn rank_against(store: &EmbeddingStore, processed: &Matrix, bundle: &TaskBundle, k: usize, top: usize) -> Result<TrialReport> {
    let s_k = store.s.row(k);
    let mut scored = (0..processed.rows())
        .map(|i| Ok((i, cosine(s_k, processed.row(i))?)))
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps global-index order among ties
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let records = scored
        .into_iter()
        .take(top)
        .map(|(i, c)| record(bundle, i, Some(c)))
        .collect();
    Ok(TrialReport::from_records(Some(k), records))
}

fn check_k(bundle: &TaskBundle, top: usize) -> Result<()> {
    if top == 0 || top > bundle.n_inputs() {
        return Err(Error::Config(format!(
            "K must lie in 1..={}, got {top}",
            bundle.n_inputs()
        )));
    }
    Ok(())
}

/// The `top` variables whose processed embeddings are most cosine-similar
/// to shared embedding `k`.
pub fn top_k_similar(
    store: &EmbeddingStore,
    kernel: &AttentionKernel,
    bundle: &TaskBundle,
    k: usize,
    top: usize,
) -> Result<TrialReport> {
    if k >= store.shared_count() {
        return Err(Error::Domain(format!(
            "shared index {k} out of range for {} shared embeddings",
            store.shared_count()
        )));
    }
    check_k(bundle, top)?;
    rank_against(store, &processed_all(store, kernel)?, bundle, k, top)
}

/// One trial per shared embedding drawn without replacement.
pub fn run_trials(
    store: &EmbeddingStore,
    kernel: &AttentionKernel,
    bundle: &TaskBundle,
    n_trials: usize,
    top: usize,
    rng: &mut Rng,
) -> Result<Vec<TrialReport>> {
    if n_trials > store.shared_count() {
        return Err(Error::Config(format!(
            "{n_trials} trials requested but only {} shared embeddings exist",
            store.shared_count()
        )));
    }
    check_k(bundle, top)?;
    let processed = processed_all(store, kernel)?;
    let picks = rng.sample_without_replacement(store.shared_count(), n_trials);
    crate::par::map_slice(&picks, |&k| rank_against(store, &processed, bundle, k, top))
        .into_iter()
        .collect()
}

/// Trials of `top` variables drawn uniformly without replacement.
pub fn random_baseline(bundle: &TaskBundle, n_trials: usize, top: usize, rng: &mut Rng) -> Result<Vec<TrialReport>> {
    check_k(bundle, top)?;
    Ok((0..n_trials)
        .map(|_| {
            let records = rng
                .sample_without_replacement(bundle.n_inputs(), top)
                .into_iter()
                .map(|g| record(bundle, g, None))
                .collect();
            TrialReport::from_records(None, records)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: usize,
    pub dataset: String,
    /// Largest attention probability on the shared embedding over the task's variables.
    pub max_probability: f64,
    /// Largest cosine between the shared embedding and the task's processed embeddings.
    pub max_cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedUsage {
    pub shared_index: usize,
    /// Tasks whose max attention probability exceeds the threshold.
    pub task_count: usize,
    /// The `top_n` tasks by max attention probability.
    pub top_tasks: Vec<TaskScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingReport {
    pub threshold: f64,
    /// Task counts for every shared embedding, indexed by shared embedding.
    pub task_counts: Vec<usize>,
    /// The `top_n` most widely used shared embeddings.
    pub common: Vec<SharedUsage>,
}

pub fn sharing_report(
    store: &EmbeddingStore,
    kernel: &AttentionKernel,
    bundle: &TaskBundle,
    threshold: f64,
    top_n: usize,
) -> Result<SharingReport> {
    if threshold.is_nan() {
        return Err(Error::Config("sharing threshold must be a number".into()));
    }
    let rows: Vec<usize> = (0..store.z.rows()).collect();
    let attended = attend(store, &rows, kernel)?;
    let d = store.shared_count();
    let n_tasks = bundle.len();
    // max probability / cosine per (task, shared)
    let mut max_p = vec![vec![f64::NEG_INFINITY; d]; n_tasks];
    let mut max_c = vec![vec![f64::NEG_INFINITY; d]; n_tasks];
    for t in 0..n_tasks {
        for i in bundle.input_rows(t) {
            let p = attended.probs.row(i);
            for k in 0..d {
                max_p[t][k] = max_p[t][k].max(p[k]);
                max_c[t][k] = max_c[t][k].max(cosine(store.s.row(k), attended.f.row(i))?);
            }
        }
    }
    let task_counts: Vec<usize> = (0..d)
        .map(|k| (0..n_tasks).filter(|&t| max_p[t][k] > threshold).count())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| task_counts[b].cmp(&task_counts[a]));
    let common = order
        .into_iter()
        .take(top_n)
        .map(|k| {
            let mut tasks: Vec<usize> = (0..n_tasks).collect();
            tasks.sort_by(|&a, &b| max_p[b][k].total_cmp(&max_p[a][k]));
            SharedUsage {
                shared_index: k,
                task_count: task_counts[k],
                top_tasks: tasks
                    .into_iter()
                    .take(top_n)
                    .map(|t| TaskScore {
                        task_id: t,
                        dataset: bundle.task(t).spec.name.clone(),
                        max_probability: max_p[t][k],
                        max_cosine: max_c[t][k],
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(SharingReport {
        threshold,
        task_counts,
        common,
    })
}

/// `‖S‖_F² / σ_max²` of the shared matrix.
pub fn stable_rank_report(store: &EmbeddingStore) -> Result<f64> {
    stable_rank(&store.s)
}

/// Everything `analyze` produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub trials: Vec<TrialReport>,
    pub trial_summary: TrialSummary,
    pub baseline_summary: TrialSummary,
    pub baseline_dominant_histogram: BTreeMap<usize, usize>,
    pub sharing: SharingReport,
    pub stable_rank: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub trials: usize,
    pub k: usize,
    pub baseline_trials: usize,
    pub sharing_threshold: f64,
    pub top_n: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            trials: 5,
            k: DEFAULT_K,
            baseline_trials: 1000,
            sharing_threshold: DEFAULT_SHARING_THRESHOLD,
            top_n: DEFAULT_TOP_N,
        }
    }
}

pub fn analyze(
    store: &EmbeddingStore,
    kernel: &AttentionKernel,
    bundle: &TaskBundle,
    options: &AnalysisOptions,
    rng: &mut Rng,
) -> Result<AnalysisReport> {
    let trials = run_trials(store, kernel, bundle, options.trials, options.k, &mut rng.fork(0))?;
    let baseline = random_baseline(bundle, options.baseline_trials, options.k, &mut rng.fork(1))?;
    let mut histogram = BTreeMap::new();
    for t in &baseline {
        *histogram.entry(t.dominant_sa.count).or_insert(0) += 1;
    }
    Ok(AnalysisReport {
        trial_summary: summarize(&trials),
        baseline_summary: summarize(&baseline),
        baseline_dominant_histogram: histogram,
        trials,
        sharing: sharing_report(store, kernel, bundle, options.sharing_threshold, options.top_n)?,
        stable_rank: stable_rank_report(store)?,
    })
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", line(rule.iter().map(String::as_str).collect()));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
}

impl AnalysisReport {
    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            let _ = writeln!(
                out,
                "shared embedding {}: dominant {} ({}/{}), {} areas, {} datasets",
                t.shared_index.unwrap_or(0),
                t.dominant_sa.area,
                t.dominant_sa.count,
                t.records.len(),
                t.n_subject_areas,
                t.n_distinct_datasets
            );
            let rows: Vec<Vec<String>> = t
                .records
                .iter()
                .map(|r| {
                    vec![
                        r.dataset.clone(),
                        r.description.clone().unwrap_or_else(|| format!("variable {}", r.position)),
                        r.subject_area.to_string(),
                        r.cosine.map_or(String::new(), |c| format!("{c:.4}")),
                    ]
                })
                .collect();
            table(&mut out, &["dataset", "variable", "area", "cosine"], &rows);
            out.push('\n');
        }
        let s = &self.trial_summary;
        let b = &self.baseline_summary;
        let rows = vec![
            vec![
                "trained".into(),
                s.trials.to_string(),
                format!("{:.4}", s.mean_purity),
                format!("{:.3}", s.mean_subject_areas),
                format!("{:.3}", s.majority_rate),
            ],
            vec![
                "random".into(),
                b.trials.to_string(),
                format!("{:.4}", b.mean_purity),
                format!("{:.3}", b.mean_subject_areas),
                format!("{:.3}", b.majority_rate),
            ],
        ];
        table(&mut out, &["source", "trials", "purity", "areas", "majority"], &rows);
        out.push('\n');
        let _ = writeln!(
            out,
            "commonly shared embeddings (attention > {}):",
            self.sharing.threshold
        );
        let rows: Vec<Vec<String>> = self
            .sharing
            .common
            .iter()
            .map(|u| {
                vec![
                    u.shared_index.to_string(),
                    u.task_count.to_string(),
                    u.top_tasks
                        .iter()
                        .map(|t| format!("{} ({:.3})", t.dataset, t.max_probability))
                        .collect::<Vec<_>>()
                        .join(", "),
                ]
            })
            .collect();
        table(&mut out, &["shared", "tasks", "top tasks"], &rows);
        let _ = writeln!(out, "\nstable rank of S: {:.4}", self.stable_rank);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shared_embeddings::{init_store, InitScheme};
    use crate::task_data::{generate_synthetic, Sample, SyntheticConfig, Task, TaskSpec};

    fn bundle_with(areas: &[(SubjectArea, usize)]) -> TaskBundle {
        let tasks = areas
            .iter()
            .enumerate()
            .map(|(i, &(area, n))| Task {
                spec: TaskSpec {
                    task_id: i,
                    name: format!("task-{i}"),
                    subject_area: area,
                    n_inputs: n,
                    n_classes: 2,
                    variable_descriptions: None,
                },
                train: vec![Sample { values: vec![0.0; n], label: 0 }],
                validation: vec![Sample { values: vec![0.0; n], label: 0 }],
                test: vec![Sample { values: vec![0.0; n], label: 1 }],
            })
            .collect();
        TaskBundle::new(tasks).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn single_shared_embedding_ties_fall_back_to_index() {
        let bundle = bundle_with(&[(SubjectArea::Biology, 3), (SubjectArea::PhysicsAndChemistry, 3)]);
        let store = init_store(&bundle, 4, 1, InitScheme::gaussian(1.0), &mut Rng::new(1)).unwrap();
        let t = top_k_similar(&store, &AttentionKernel::Softmax, &bundle, 0, 4).unwrap();
        let idx: Vec<usize> = t.records.iter().map(|r| r.global_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!(t.records.iter().all(|r| (r.cosine.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn planted_neighbours_come_first() {
        let bundle = generate_synthetic(&SyntheticConfig::default(), &mut Rng::new(2)).unwrap();
        let mut store = init_store(&bundle, 8, 8, InitScheme::gaussian(1.0), &mut Rng::new(3)).unwrap();
        // a huge query along s_k makes attention one-hot on s_k
        let planted = [4, 9, 11, 17, 20];
        let k = 3;
        for &i in &planted {
            let row: Vec<f64> = store.s.row(k).iter().map(|v| 1e3 * v).collect();
            store.z.row_mut(i).copy_from_slice(&row);
        }
        let t = top_k_similar(&store, &AttentionKernel::Softmax, &bundle, k, 5).unwrap();
        let mut got: Vec<usize> = t.records.iter().map(|r| r.global_index).collect();
        got.sort();
        assert_eq!(got, planted);
    }

    #[test]
    fn trials_use_each_shared_embedding_once() {
        let bundle = generate_synthetic(&SyntheticConfig::default(), &mut Rng::new(4)).unwrap();
        let store = init_store(&bundle, 6, 6, InitScheme::gaussian(1.0), &mut Rng::new(5)).unwrap();
        let kernel = AttentionKernel::Softmax;
        let a = run_trials(&store, &kernel, &bundle, 6, 5, &mut Rng::new(9)).unwrap();
        let mut used: Vec<usize> = a.iter().map(|t| t.shared_index.unwrap()).collect();
        used.sort();
        assert_eq!(used, (0..6).collect::<Vec<_>>());
        let b = run_trials(&store, &kernel, &bundle, 6, 5, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            run_trials(&store, &kernel, &bundle, 7, 5, &mut Rng::new(9)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn summary_matches_reports() {
        let bundle = generate_synthetic(&SyntheticConfig::default(), &mut Rng::new(6)).unwrap();
        let trials = random_baseline(&bundle, 50, 5, &mut Rng::new(1)).unwrap();
        let s = summarize(&trials);
        let dominant: usize = trials.iter().map(|t| t.dominant_sa.count).sum();
        assert_eq!(s.total_dominant_count, dominant);
        for t in &trials {
            let areas: HashSet<SubjectArea> = t.records.iter().map(|r| r.subject_area).collect();
            assert_eq!(areas.len(), t.n_subject_areas);
            let c = t.records.iter().filter(|r| r.subject_area == t.dominant_sa.area).count();
            assert_eq!(c, t.dominant_sa.count);
        }
    }

    #[test]
    fn baseline_degenerate_bundles() {
        let one = bundle_with(&[(SubjectArea::Games, 4), (SubjectArea::Games, 4)]);
        for t in random_baseline(&one, 20, 5, &mut Rng::new(1)).unwrap() {
            assert_eq!(t.dominant_sa.count, 5);
        }
        let distinct = bundle_with(&[
            (SubjectArea::Biology, 1),
            (SubjectArea::PhysicsAndChemistry, 1),
            (SubjectArea::Games, 1),
            (SubjectArea::Law, 1),
            (SubjectArea::Other, 1),
        ]);
        for t in random_baseline(&distinct, 20, 5, &mut Rng::new(1)).unwrap() {
            assert_eq!(t.n_subject_areas, 5);
        }
    }

    #[test]
    fn sharing_threshold_edges() {
        let bundle = bundle_with(&[(SubjectArea::Biology, 2), (SubjectArea::PhysicsAndChemistry, 3), (SubjectArea::Law, 1)]);
        let store = init_store(&bundle, 4, 1, InitScheme::gaussian(1.0), &mut Rng::new(1)).unwrap();
        let r = sharing_report(&store, &AttentionKernel::Softmax, &bundle, 0.1, 5).unwrap();
        assert_eq!(r.task_counts, vec![3]);
        let r = sharing_report(&store, &AttentionKernel::Softmax, &bundle, 1.0, 5).unwrap();
        assert_eq!(r.task_counts, vec![0]);
    }

    #[test]
    fn sharing_counts_monotone_in_threshold() {
        let bundle = generate_synthetic(&SyntheticConfig::default(), &mut Rng::new(7)).unwrap();
        let store = init_store(&bundle, 6, 6, InitScheme::gaussian(2.0), &mut Rng::new(8)).unwrap();
        let mut prev: Option<Vec<usize>> = None;
        for th in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let r = sharing_report(&store, &AttentionKernel::Softmax, &bundle, th, 5).unwrap();
            if let Some(p) = &prev {
                assert!(r.task_counts.iter().zip(p).all(|(a, b)| a <= b));
            }
            prev = Some(r.task_counts);
        }
    }

    #[test]
    fn stable_rank_of_orthogonal_and_rank_one() {
        let bundle = bundle_with(&[(SubjectArea::Biology, 2)]);
        let store = init_store(&bundle, 6, 6, InitScheme::orthogonal(1.0), &mut Rng::new(1)).unwrap();
        assert!((stable_rank_report(&store).unwrap() - 6.0).abs() < 1e-8);
        let mut r1 = store.clone();
        r1.s = Matrix::outer(&[1.0, 2.0, 0.5, 1.0, 1.0, 3.0], &[1.0, -1.0, 2.0, 0.0, 1.0, 1.0]);
        assert!((stable_rank_report(&r1).unwrap() - 1.0).abs() < 1e-12);
        r1.s = Matrix::zeros(6, 6);
        assert!(matches!(stable_rank_report(&r1), Err(Error::Domain(_))));
    }

    #[test]
    fn text_tables_render() {
        let bundle = generate_synthetic(&SyntheticConfig::default(), &mut Rng::new(9)).unwrap();
        let store = init_store(&bundle, 6, 6, InitScheme::gaussian(1.0), &mut Rng::new(10)).unwrap();
        let options = AnalysisOptions {
            baseline_trials: 20,
            ..AnalysisOptions::default()
        };
        let report = analyze(&store, &AttentionKernel::Softmax, &bundle, &options, &mut Rng::new(1)).unwrap();
        let text = report.to_text();
        assert!(text.contains("stable rank of S"));
        assert_eq!(report.trials.len(), 5);
    }
}
