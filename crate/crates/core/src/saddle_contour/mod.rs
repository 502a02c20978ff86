//! Finite-n saddle point, its branch, the steepest-descent contours and the
//! phase function.

mod branch;
mod contour;
mod equation;
mod lemmas;
mod phase;

pub use branch::{build_branch, default_grid, finite_saddle, SaddleBranch};
pub use contour::{build_contours, ContourPair, LoopPoint};
pub use equation::{Loop, SaddleEquation};
pub use lemmas::{check_lemmas, LemmaPredicate, LemmaReport};
pub use phase::PhaseFn;
