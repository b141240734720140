//! Validated probability objects and the information and leakage measures
//! built on them.

pub mod joint;
pub mod measures;
pub mod mechanism;

pub use joint::{validate_joint, DistributionVector, JointDistribution, JointDocument, LogBase};
pub use measures::{
    conditional_entropy, entropy, joint_product_tv, kl_divergence, l1_distance, leakage_measures,
    mutual_information, mutual_information_of, total_variation, Direction, LeakageReport,
    LetterLeakage,
};
pub use mechanism::{Criterion, Mechanism, MechanismDocument, MechanismKind, TripleDistribution};
