//! Exact sum degrees-of-freedom for K-user MIMO interference channels in which
//! every transmitter/receiver pair carries the same number of antennas at both
//! ends, together with the invertible channel transformations that expose the
//! block-zero structure used in the converse, and numeric cross-checks.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod numerics;
pub mod simulate;
pub mod transform;

pub use bounds::{DoFReport, DoFValue, PartitionPlan, Region2D, Regime};
pub use channel::{AntennaProfile, ChannelRealization};
pub use numerics::{ComplexMatrix, Tolerance};
pub use transform::{TransformPair, TransformedChannel, Variant, ZeroPattern};
