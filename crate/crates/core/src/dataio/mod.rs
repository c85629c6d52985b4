//! Epoched datasets: in-memory representation, on-disk format, channel
//! layouts and the synthetic generator.

mod dataset;
mod format;
mod layout;
mod synthetic;

pub use dataset::{EpochedDataset, Trial};
pub use format::{read_dataset, read_manifest, subject_file_name, write_dataset, Manifest, FORMAT_VERSION, MANIFEST_FILE};
pub use layout::ChannelLayout;
pub use synthetic::{default_info_channels, generate_synthetic, SyntheticSpec};
