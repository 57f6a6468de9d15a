use crate::dsl::CoefficientField;
use crate::model::DevTag;
use crate::sde::SharedField;
use std::sync::Arc;

/// Coefficients of the linear limit equation
/// `dZ = gradF Z dt + [gradG Z] dW2 + drift_extra dt + sigma_extra dW~`.
///
/// `None` means the term is identically zero.
#[derive(Clone)]
pub struct LimitSdeSpec {
    pub tag: DevTag,
    pub d2: usize,
    /// `d2 x d2`, entry `(i, j)` is `d F_i / d y_j`.
    pub grad_fbar: SharedField,
    /// `grad_g[m]` is `d G / d y_m`, each `d2 x d2`. Empty when G is constant.
    pub grad_g: Vec<SharedField>,
    pub drift_extra: Option<SharedField>,
    pub sigma_extra: Option<SharedField>,
}

impl LimitSdeSpec {
    pub fn from_parts(
        tag: DevTag,
        d2: usize,
        grad_fbar: SharedField,
        grad_g: Vec<SharedField>,
        drift_extra: Option<SharedField>,
        sigma_extra: Option<SharedField>,
    ) -> Self {
        LimitSdeSpec {
            tag,
            d2,
            grad_fbar,
            grad_g,
            drift_extra,
            sigma_extra,
        }
    }

    /// Symbolic y-derivatives of G, dropping identically zero ones.
    pub fn grad_g_fields(dg: Vec<CoefficientField>) -> Vec<SharedField> {
        if dg.iter().all(|f| f.is_zero()) {
            return Vec::new();
        }
        dg.into_iter().map(|f| Arc::new(f) as SharedField).collect()
    }
}
