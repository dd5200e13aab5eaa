pub mod estimate;
pub mod infer;
pub mod surface;
pub mod verify;
