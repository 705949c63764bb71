mod augment;
mod chexpert;
mod dataset;
mod manifest;
mod preprocess;
mod probe;
mod split;
mod synthetic;

pub use augment::{augment_view, augment_views, AugmentConfig};
pub use chexpert::{convert_chexpert, Conversion};
pub use dataset::{load_images, Dataset};
pub use manifest::{load_manifest, Manifest, ManifestRow, IMAGE_COLUMN, LABEL_COLUMN, PATIENT_COLUMN};
pub use preprocess::{
    bilinear_resize, load_gray_png, preprocess, resample_region, save_gray_png, FULL_SCALE_INPUT_SIZE, IMAGENET_MEAN,
    IMAGENET_STD, MIN_INPUT_SIZE, TOY_INPUT_SIZE,
};
pub use probe::{linear_probe, ProbeConfig, ProbeRow, PROBE_GATE};
pub use split::{split, SplitSpec, Splits};
pub use synthetic::{
    generate_synthetic, write_synthetic_dataset, SyntheticConfig, SyntheticSample, DEFAULT_PREVALENCE,
    DEFAULT_RAW_SIZE, MANIFEST_FILE,
};
