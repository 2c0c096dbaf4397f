pub mod augment;
pub mod calibrate;
pub mod eval;
pub mod score;
pub mod seg_eval;
pub mod typicality;
