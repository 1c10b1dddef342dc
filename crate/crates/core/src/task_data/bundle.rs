use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SubjectArea;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: usize,
    pub name: String,
    pub subject_area: SubjectArea,
    pub n_inputs: usize,
    pub n_classes: usize,
    pub variable_descriptions: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub spec: TaskSpec,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Task {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Disjoint classification tasks plus the global numbering of their variables.
///
/// Observed variable `i` of task `t` owns row `input_offsets[t] + i` of the raw
/// embedding matrix; class `j` owns row `target_offsets[t] + j` of the target
/// embedding matrix. Offsets follow task order, so the ranges partition
/// `[0, N)` and `[0, M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBundle {
    tasks: Vec<Task>,
    input_offsets: Vec<usize>,
    target_offsets: Vec<usize>,
}

/// ±1 target vector with a single +1 at the label.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetEncoding(pub Vec<f64>);

impl TargetEncoding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_target(label: usize, m: usize) -> Result<TargetEncoding> {
    if label >= m {
        return Err(Error::Domain(format!("label {label} out of range for {m} classes")));
    }
    Ok(TargetEncoding(
        (0..m).map(|j| if j == label { 1.0 } else { -1.0 }).collect(),
    ))
}

impl TaskBundle {
    /// Validates the tasks and assigns global indices in task order.
    pub fn new(mut tasks: Vec<Task>) -> Result<Self> {
        let mut input_offsets = Vec::with_capacity(tasks.len());
        let mut target_offsets = Vec::with_capacity(tasks.len());
        let (mut n, mut m) = (0, 0);
        for (id, task) in tasks.iter_mut().enumerate() {
            task.spec.task_id = id;
            validate_task(task)?;
            input_offsets.push(n);
            target_offsets.push(m);
            n += task.spec.n_inputs;
            m += task.spec.n_classes;
        }
        Ok(TaskBundle {
            tasks,
            input_offsets,
            target_offsets,
        })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> &Task {
        &self.tasks[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Total observed variables `N`.
    pub fn n_inputs(&self) -> usize {
        self.tasks.iter().map(|t| t.spec.n_inputs).sum()
    }

    /// Total target variables over all tasks.
    pub fn n_targets(&self) -> usize {
        self.tasks.iter().map(|t| t.spec.n_classes).sum()
    }

    pub fn input_rows(&self, task: usize) -> Range<usize> {
        let start = self.input_offsets[task];
        start..start + self.tasks[task].spec.n_inputs
    }

    pub fn target_rows(&self, task: usize) -> Range<usize> {
        let start = self.target_offsets[task];
        start..start + self.tasks[task].spec.n_classes
    }

    pub fn global_input_index(&self, task: usize, position: usize) -> usize {
        assert!(position < self.tasks[task].spec.n_inputs);
        self.input_offsets[task] + position
    }

    pub fn global_target_index(&self, task: usize, class: usize) -> usize {
        assert!(class < self.tasks[task].spec.n_classes);
        self.target_offsets[task] + class
    }

    /// Inverse of [`global_input_index`](Self::global_input_index).
    pub fn variable_of(&self, global: usize) -> (usize, usize) {
        let task = self.input_offsets.partition_point(|&o| o <= global) - 1;
        (task, global - self.input_offsets[task])
    }

    /// z-scores every variable with statistics from its task's train split.
    /// Constant variables keep unit scale.
    pub fn standardize(&mut self) {
        for task in &mut self.tasks {
            let n = task.train.len() as f64;
            for i in 0..task.spec.n_inputs {
                let mean = task.train.iter().map(|s| s.values[i]).sum::<f64>() / n;
                let var = task.train.iter().map(|s| (s.values[i] - mean).powi(2)).sum::<f64>() / n;
                let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
                for s in task
                    .train
                    .iter_mut()
                    .chain(task.validation.iter_mut())
                    .chain(task.test.iter_mut())
                {
                    s.values[i] = (s.values[i] - mean) / std;
                }
            }
        }
    }

    /// Uniform task, then `batch_size` train samples drawn with replacement.
    pub fn sample_step(&self, rng: &mut Rng, batch_size: usize) -> Result<(usize, Vec<&Sample>)> {
        if self.tasks.is_empty() {
            return Err(Error::Domain("cannot sample from an empty bundle".into()));
        }
        if batch_size == 0 {
            return Err(Error::Domain("batch size must be at least 1".into()));
        }
        let task_id = rng.below(self.tasks.len());
        let train = &self.tasks[task_id].train;
        let batch = (0..batch_size).map(|_| &train[rng.below(train.len())]).collect();
        Ok((task_id, batch))
    }
}

fn validate_task(task: &Task) -> Result<()> {
    let spec = &task.spec;
    let fail = |message: String| Error::Load {
        task: spec.name.clone(),
        row: None,
        message,
    };
    if spec.n_inputs == 0 {
        return Err(fail("task needs at least one input variable".into()));
    }
    if spec.n_classes < 2 {
        return Err(fail(format!("task needs at least two classes, got {}", spec.n_classes)));
    }
    if let Some(desc) = &spec.variable_descriptions {
        if desc.len() != spec.n_inputs {
            return Err(fail(format!(
                "{} variable descriptions for {} inputs",
                desc.len(),
                spec.n_inputs
            )));
        }
    }
    if task.train.is_empty() || task.test.is_empty() {
        return Err(fail("train and test splits must be nonempty".into()));
    }
    for (split, samples) in [("train", &task.train), ("validation", &task.validation), ("test", &task.test)] {
        for (row, s) in samples.iter().enumerate() {
            if s.values.len() != spec.n_inputs || s.label >= spec.n_classes || s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Load {
                    task: spec.name.clone(),
                    row: Some(row),
                    message: format!("invalid {split} sample"),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// On-disk format

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Whether the CSV files start with a header row.
    #[serde(default)]
    pub header: bool,
    pub tasks: Vec<ManifestTask>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTask {
    pub name: String,
    pub subject_area: String,
    pub n_inputs: usize,
    pub n_classes: usize,
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_descriptions: Option<Vec<String>>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
/// Share of train held out as test when a task ships no test file.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.15;

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub seed: u64,
    /// Share of train carved out for validation when a task ships none.
    pub validation_fraction: f64,
    pub standardize: bool,
    /// Overrides the manifest's `header` flag.
    pub header: Option<bool>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            seed: 0,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            standardize: true,
            header: None,
        }
    }
}

pub fn load_bundle(dir: &Path, options: &LoadOptions) -> Result<TaskBundle> {
    if !(0.0..1.0).contains(&options.validation_fraction) {
        return Err(Error::Config(format!(
            "validation fraction must lie in [0, 1), got {}",
            options.validation_fraction
        )));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let header = options.header.unwrap_or(manifest.header);
    let base = Rng::new(options.seed);

    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for (id, entry) in manifest.tasks.iter().enumerate() {
        let subject_area: SubjectArea = entry.subject_area.parse().map_err(|e| Error::Load {
            task: entry.name.clone(),
            row: None,
            message: format!("{e}"),
        })?;
        let spec = TaskSpec {
            task_id: id,
            name: entry.name.clone(),
            subject_area,
            n_inputs: entry.n_inputs,
            n_classes: entry.n_classes,
            variable_descriptions: entry.variable_descriptions.clone(),
        };
        let read = |rel: &Path| read_csv(&dir.join(rel), &spec, header);
        let mut train = read(&entry.train)?;
        let mut rng = base.fork(id as u64);
        let test = match &entry.test {
            Some(p) => read(p)?,
            None => stratified_split(&mut train, DEFAULT_TEST_FRACTION, &mut rng),
        };
        let validation = match &entry.validation {
            Some(p) => read(p)?,
            None => stratified_split(&mut train, options.validation_fraction, &mut rng),
        };
        tasks.push(Task {
            spec,
            train,
            validation,
            test,
        });
    }
    let mut bundle = TaskBundle::new(tasks)?;
    if options.standardize {
        bundle.standardize();
    }
    Ok(bundle)
}

/// Moves a per-class `fraction` of `samples` into the returned vector.
/// Original relative order is kept on both sides.
pub fn stratified_split(samples: &mut Vec<Sample>, fraction: f64, rng: &mut Rng) -> Vec<Sample> {
    if fraction <= 0.0 || samples.len() < 2 {
        return Vec::new();
    }
    let n_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut taken = vec![false; samples.len()];
    let mut count = 0;
    for idx in &mut by_class {
        rng.shuffle(idx);
        let want = ((fraction * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        for &i in &idx[..want] {
            taken[i] = true;
        }
        count += want;
    }
    if count == 0 {
        let largest = by_class.iter().max_by_key(|v| v.len()).unwrap();
        taken[largest[0]] = true;
    }
    let (mut kept, mut moved) = (Vec::new(), Vec::new());
    for (s, t) in std::mem::take(samples).into_iter().zip(taken) {
        if t {
            moved.push(s);
        } else {
            kept.push(s);
        }
    }
    *samples = kept;
    moved
}

fn read_csv(path: &Path, spec: &TaskSpec, header: bool) -> Result<Vec<Sample>> {
    let load_err = |row: Option<usize>, message: String| Error::Load {
        task: spec.name.clone(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| load_err(None, format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| load_err(Some(row), e.to_string()))?;
        if record.len() != spec.n_inputs + 1 {
            return Err(load_err(
                Some(row),
                format!(
                    "expected {} feature columns plus label, found {} columns",
                    spec.n_inputs,
                    record.len()
                ),
            ));
        }
        let mut values = Vec::with_capacity(spec.n_inputs);
        for cell in record.iter().take(spec.n_inputs) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| load_err(Some(row), format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(load_err(Some(row), format!("non-finite cell `{cell}`")));
            }
            values.push(v);
        }
        let cell = record.get(spec.n_inputs).unwrap().trim();
        let label: usize = cell
            .parse()
            .map_err(|_| load_err(Some(row), format!("label `{cell}` is not a class index")))?;
        if label >= spec.n_classes {
            return Err(load_err(
                Some(row),
                format!("label {label} out of range for {} classes", spec.n_classes),
            ));
        }
        samples.push(Sample { values, label });
    }
    Ok(samples)
}

fn write_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut out = String::new();
    for s in samples {
        for v in &s.values {
            // `{}` on f64 prints the shortest representation that parses back exactly.
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", s.label));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the bundle as `manifest.json` plus one directory of CSVs per task.
/// All three splits are written, so reloading reproduces the same partition.
pub fn save_bundle(bundle: &TaskBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(bundle.len());
    for task in bundle.tasks() {
        let sub = PathBuf::from(format!("task_{:03}", task.spec.task_id));
        fs::create_dir_all(dir.join(&sub)).map_err(|e| Error::io(dir.join(&sub), e))?;
        let train = sub.join("train.csv");
        let validation = sub.join("validation.csv");
        let test = sub.join("test.csv");
        write_csv(&dir.join(&train), &task.train)?;
        write_csv(&dir.join(&test), &task.test)?;
        let validation = if task.validation.is_empty() {
            None
        } else {
            write_csv(&dir.join(&validation), &task.validation)?;
            Some(validation)
        };
        entries.push(ManifestTask {
            name: task.spec.name.clone(),
            subject_area: task.spec.subject_area.to_string(),
            n_inputs: task.spec.n_inputs,
            n_classes: task.spec.n_classes,
            train,
            validation,
            test: Some(test),
            variable_descriptions: task.spec.variable_descriptions.clone(),
        });
    }
    let manifest = Manifest {
        header: false,
        tasks: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
