//! Numerical toolkit for the geometry of hyperbolic 3-manifold ends.
//!
//! The crate is organized around the data of a convex surface in H^3 and its
//! counterpart "at infinity":
//!
//! - [`forms`]: pointwise algebra of fundamental forms `(I, B)` and `(I*, B*)`,
//!   the transforms between them, curvatures, and equidistant-leaf metrics.
//! - [`epstein`]: Epstein surfaces in the upper half-space model built from a
//!   Liouville field, with the induced-metric expansion and the quadratic
//!   differential `theta`.
//! - [`schwarzian`]: Schwarzian derivatives of holomorphic maps and the
//!   comparison of `theta` against the Schwarzian of a uniformizing map.
//! - [`mesh`]: intrinsic triangle meshes (edge lengths, no embedding) with
//!   angle-defect curvature, cotangent Laplacian and integration.
//! - [`liouville`]: Newton solver for the discrete Liouville equation
//!   (uniformization to constant curvature) on a mesh.
//! - [`wvolume`]: W-volume, dual volume, renormalized-volume limit and
//!   Schlafli checks on the closed-form Fuchsian tube.
//! - [`report`]: deterministic structured-text reports shared by the CLI.

pub mod epstein;
pub mod forms;
pub mod liouville;
pub mod mesh;
pub mod report;
pub mod schwarzian;
pub mod wvolume;
