//! Task bundles: loading, validation, splitting, sampling and target encoding.

mod bundle;
mod subject_area;
mod synthetic;

pub use bundle::{
    encode_target, load_bundle, save_bundle, stratified_split, LoadOptions, Manifest, ManifestTask, Sample, Split,
    TargetEncoding, Task, TaskBundle, TaskSpec, DEFAULT_TEST_FRACTION, DEFAULT_VALIDATION_FRACTION, MANIFEST_FILE,
};
pub use subject_area::{SubjectArea, UnknownSubjectArea};
pub use synthetic::{generate_synthetic, SyntheticConfig};
