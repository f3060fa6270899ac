//! Records, normalization, window construction and data sources.

mod csv_io;
mod noise;
mod normalize;
mod profile;
mod record;
pub mod synth;
mod windows;

pub use csv_io::{load_csv, read_csv, write_csv};
pub use noise::{add_gaussian_noise, NoiseConfig};
pub use normalize::{FeatureMatrix, Normalizer};
pub use profile::{split_tail, DatasetProfile};
pub use record::{attack_labels, Label, SampleRecord};
pub use synth::{generate_synthetic_plant, synthetic_profile, PlantConfig, PlantData};
pub use windows::{input_window, make_windows, WindowGeometry, WindowSet};
