//! Synthetic stand-in for the instrumented joint: dipole physics, the sensor
//! rig, random-walk trajectories, corruption, and dataset emission.

mod dataset;
mod dipole;
mod noise;
mod rig;
mod walk;

pub use dataset::{
    csv_header, generate_dataset, parse_meta, read_csv, render_meta, write_csv, CsvRow, CsvSchema,
    CsvSplit, Dataset, DatasetConfig, Sample, SplitSizes, Standardization, DATASET_VERSION,
    META_VERSION, STEP_SECONDS,
};
pub use dipole::{dipole_field, MIN_DISTANCE, MU0_OVER_4PI};
pub use noise::{Corruptor, NoiseSpec, Spike};
pub use rig::{read_sensors, Magnet, SensorFrame, SensorRig};
pub use walk::{random_walk, random_walk_with, JointLimits, WalkConfig};
