use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Kernel functions for the LOWESS weights, all normalized so that `φ(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    TriCubic,
    Epanechnikov,
    BiQuadratic,
    Gaussian,
    InverseQuadratic,
    InverseMultiQuadratic,
    ExpRoot,
}

/// Constant of the inverse multi-quadratic kernel, chosen to minimize its L2
/// distance to the inverse quadratic kernel.
pub const INVERSE_MULTI_QUADRATIC_COEF: f64 = 52.015;

impl KernelType {
    pub const ALL: [KernelType; 7] = [
        KernelType::TriCubic,
        KernelType::Epanechnikov,
        KernelType::BiQuadratic,
        KernelType::Gaussian,
        KernelType::InverseQuadratic,
        KernelType::InverseMultiQuadratic,
        KernelType::ExpRoot,
    ];

    /// Half-width of the support for compact kernels.
    pub fn support(self) -> Option<f64> {
        match self {
            KernelType::TriCubic => Some(140.0 / 162.0),
            KernelType::Epanechnikov => Some(3.0 / 4.0),
            KernelType::BiQuadratic => Some(15.0 / 16.0),
            _ => None,
        }
    }

    pub fn is_compact(self) -> bool {
        self.support().is_some()
    }

    pub fn eval(self, d: f64) -> f64 {
        let a = d.abs();
        match self {
            KernelType::TriCubic => {
                if a <= 140.0 / 162.0 {
                    let t = 1.0 - (162.0 / 140.0 * a).powi(3);
                    t * t * t
                } else {
                    0.0
                }
            }
            KernelType::Epanechnikov => {
                if a <= 0.75 {
                    1.0 - 16.0 / 9.0 * a * a
                } else {
                    0.0
                }
            }
            KernelType::BiQuadratic => {
                if a <= 15.0 / 16.0 {
                    let t = 1.0 - (16.0 / 15.0 * a).powi(2);
                    t * t
                } else {
                    0.0
                }
            }
            KernelType::Gaussian => (-PI * a * a).exp(),
            KernelType::InverseQuadratic => 1.0 / (1.0 + PI * PI * a * a),
            KernelType::InverseMultiQuadratic => {
                1.0 / (1.0 + INVERSE_MULTI_QUADRATIC_COEF * a * a).sqrt()
            }
            KernelType::ExpRoot => (-2.0 * a.sqrt()).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelType::TriCubic => "tri_cubic",
            KernelType::Epanechnikov => "epanechnikov",
            KernelType::BiQuadratic => "bi_quadratic",
            KernelType::Gaussian => "gaussian",
            KernelType::InverseQuadratic => "inverse_quadratic",
            KernelType::InverseMultiQuadratic => "inverse_multi_quadratic",
            KernelType::ExpRoot => "exp_root",
        }
    }
}

impl fmt::Display for KernelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
