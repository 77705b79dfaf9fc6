//! Classification of final crystal configurations and defect statistics.

mod classify;
mod fourier;
mod render;

pub use classify::{
    classify_configuration, defect_density, kink_sites_of_signs, staggered_order,
    ClassifierThresholds, CrystalClass, CrystalConfiguration, StaggeredOrder,
};
pub use fourier::{
    build_reference_templates, fourier_template_classify, FourierOutcome, Template,
    TemplateLibrary,
};
pub use render::{render_synthetic_image, ImageGeometry, SyntheticImage};
