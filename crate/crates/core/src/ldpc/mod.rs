//! LDPC codes for the coded uplink: degree profiles, code construction,
//! sum-product decoding, the joint detector-decoder and EXIT measurement.

pub mod bp;
pub mod code;
pub mod exit;
pub mod joint;
pub mod profile;

pub use bp::{bp_decode, BpDecoder, BpOutput};
pub use code::{build_code, LdpcCode};
pub use joint::{
    joint_detect_decode, joint_detect_decode_uses, separate_detect_decode, ChannelUse, JointGraphConfig, JointOutput,
};
pub use profile::DegreeProfile;
