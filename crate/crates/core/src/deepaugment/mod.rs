//! Image augmentation by distorting the weights and activations of a small
//! image-to-image network.

mod conv;
mod distort;
mod net;
mod pipeline;

pub use conv::{conv_forward, ConvLayer, FeatureMap, KERNEL};
pub use distort::{
    apply_weight_distortions, deepaugment_forward, sample_signal_distortions, sample_weight_distortions,
    DistortionParams, DistortionSpec, SignalOp, SignalPlan, SpatialAxis, WeightOp,
};
pub use net::{Img2ImgNet, CHANNEL_PLAN, RANDOM_INIT_SEED};
pub use pipeline::{
    augment_dataset, augment_images, augment_one, distorted_network, network_schedule, AugmentConfig,
    AugmentReport, ImageRecord, NetworkRecord, SkipRecord, DEFAULT_REFRESH_PROB, REPORT_VERSION,
};
