use super::{Sample, SubjectArea, Task, TaskBundle, TaskSpec};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng};

const MAX_DRAWS_PER_SAMPLE: usize = 1000;

/// Knobs for [`generate_synthetic`]. Defaults give the desk-scale bundle
/// used by the acceptance suite.
#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub n_tasks: usize,
    pub concept_families: usize,
    /// Latent concepts owned by each family.
    pub concepts_per_family: usize,
    pub min_inputs: usize,
    pub max_inputs: usize,
    pub max_classes: usize,
    pub train_per_task: usize,
    pub validation_per_task: usize,
    pub test_per_task: usize,
    /// Observation noise added to each input variable.
    pub noise: f64,
    /// Latent draws closer than this to a class boundary are rejected.
    pub margin: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tasks: 6,
            concept_families: 2,
            concepts_per_family: 3,
            min_inputs: 3,
            max_inputs: 6,
            max_classes: 3,
            train_per_task: 400,
            validation_per_task: 100,
            test_per_task: 200,
            noise: 0.1,
            margin: 0.25,
        }
    }
}

impl SyntheticConfig {
    pub fn new(n_tasks: usize, concept_families: usize) -> Self {
        SyntheticConfig {
            n_tasks,
            concept_families,
            ..Default::default()
        }
    }
}

/// Generates disjoint tasks grouped into concept families.
///
/// Every family owns `concepts_per_family` latent variables and a class
/// prototype matrix. Task `t` belongs to family `t mod families`; its input
/// `i` observes concept `i mod concepts` with a random signed loading plus
/// noise, and its label is the argmax of the family prototypes applied to the
/// latents. Variables of one family therefore play interchangeable roles
/// across tasks, while labels stay linearly separable in the latents.
pub fn generate_synthetic(config: &SyntheticConfig, rng: &mut Rng) -> Result<TaskBundle> {
    let c = config;
    if c.concept_families == 0 || c.n_tasks < c.concept_families {
        return Err(Error::Config(format!(
            "need n_tasks ≥ concept_families ≥ 1, got {} tasks and {} families",
            c.n_tasks, c.concept_families
        )));
    }
    if c.min_inputs == 0 || c.min_inputs > c.max_inputs || c.max_classes < 2 || c.concepts_per_family == 0 {
        return Err(Error::Config("invalid synthetic arity settings".into()));
    }
    if c.train_per_task == 0 || c.test_per_task == 0 {
        return Err(Error::Config("train and test sizes must be positive".into()));
    }

    let l = c.concepts_per_family;
    let prototypes: Vec<Matrix> = (0..c.concept_families)
        .map(|_| {
            let mut m = Matrix::from_fn(c.max_classes, l, |_, _| rng.normal());
            for k in 0..c.max_classes {
                let len = dot(m.row(k), m.row(k)).sqrt();
                m.row_mut(k).iter_mut().for_each(|v| *v /= len);
            }
            m
        })
        .collect();
    let family_loadings: Vec<Vec<f64>> = (0..c.concept_families)
        .map(|_| {
            (0..l)
                .map(|_| {
                    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                    sign * (0.8 + 0.4 * rng.uniform())
                })
                .collect()
        })
        .collect();

    let mut tasks = Vec::with_capacity(c.n_tasks);
    for t in 0..c.n_tasks {
        let family = t % c.concept_families;
        let n_inputs = c.min_inputs + rng.below(c.max_inputs - c.min_inputs + 1);
        let n_classes = 2 + rng.below(c.max_classes - 1);
        let loadings: Vec<f64> = (0..n_inputs).map(|i| family_loadings[family][i % l]).collect();
        let proto = &prototypes[family];

        let mut draw = |count: usize| -> Result<Vec<Sample>> {
            let mut out = Vec::with_capacity(count);
            let mut attempts = 0usize;
            while out.len() < count {
                attempts += 1;
                if attempts > MAX_DRAWS_PER_SAMPLE * count {
                    return Err(Error::Domain(format!(
                        "task {t}: margin {} rejects almost every latent draw",
                        c.margin
                    )));
                }
                let latent: Vec<f64> = (0..l).map(|_| rng.normal()).collect();
                let scores: Vec<f64> = (0..n_classes).map(|k| dot(proto.row(k), &latent)).collect();
                let mut order: Vec<usize> = (0..n_classes).collect();
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
                if scores[order[0]] - scores[order[1]] < c.margin {
                    continue;
                }
                let values = (0..n_inputs)
                    .map(|i| loadings[i] * latent[i % l] + c.noise * rng.normal())
                    .collect();
                out.push(Sample {
                    values,
                    label: order[0],
                });
            }
            Ok(out)
        };
        let train = draw(c.train_per_task)?;
        let validation = draw(c.validation_per_task)?;
        let test = draw(c.test_per_task)?;

        let descriptions = (0..n_inputs)
            .map(|i| format!("family {family} concept {}", i % l))
            .collect();
        tasks.push(Task {
            spec: TaskSpec {
                task_id: t,
                name: format!("synthetic-{t:02}"),
                subject_area: SubjectArea::Family(family as u32),
                n_inputs,
                n_classes,
                variable_descriptions: Some(descriptions),
            },
            train,
            validation,
            test,
        });
    }
    TaskBundle::new(tasks)
}
