#![allow(
    clippy::needless_range_loop,
    clippy::wrong_self_convention,
    clippy::should_implement_trait
)]

pub mod amodel;
pub mod cli;
pub mod error;
pub mod kreweras;
pub mod polyharmonic;
pub mod ring;
pub mod series;
pub mod theta;
pub mod transeries;
pub mod verify;
pub mod walk;
