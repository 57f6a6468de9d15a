//! Effective coefficients tabulated on a `(t, y)` lattice, and the limit
//! equation assembled from them.

use super::estimate::{averaged_drift, cross_average, effective_zeta, CellContext, CellParams, CrossKind};
use super::lattice::{LatticeField, LatticeSpec};
use super::psd::{psd_sqrt, ClampReport};
use super::spec::LimitSdeSpec;
use crate::dsl::Var;
use crate::ergodics::{sample_invariant, EmpiricalMeasure, Estimate, SamplerParams};
use crate::error::{Error, Result};
use crate::model::{DevTag, MultiscaleSystem};
use crate::sde::{csv_err, fmt17, SharedField};
use std::io::Write;
use std::sync::Arc;

/// Which quantities to estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub fbar1: bool,
    pub fbar2: bool,
    pub grad_fbar1: bool,
    pub grad_fbar2: bool,
    pub zeta: bool,
    pub c_upsilon: bool,
    pub c_phi: bool,
    pub h_phi: bool,
    pub c_psi: bool,
}

impl Needs {
    /// Components the limit equation of `tag` uses.
    pub fn for_tag(tag: DevTag) -> Needs {
        let (drift, diff) = (tag.has_drift_extra(), tag.has_sigma_extra());
        let mut n = Needs::default();
        match tag.family() {
            0 => {
                n.fbar1 = true;
                n.grad_fbar1 = true;
                n.c_upsilon = drift;
                n.zeta = diff;
            }
            1 => {
                n.fbar1 = true;
                n.grad_fbar1 = true;
                n.c_phi = drift;
                n.h_phi = diff;
            }
            _ => {
                n.fbar1 = true;
                n.fbar2 = true;
                n.c_phi = true;
                n.grad_fbar2 = true;
                n.c_upsilon = drift;
                n.c_psi = drift;
                n.h_phi = diff;
            }
        }
        n
    }

    /// Only the averaged drift `k` (1 or 2).
    pub fn averaging(k: u8) -> Needs {
        Needs {
            fbar1: true,
            fbar2: k == 2,
            c_phi: k == 2,
            ..Needs::default()
        }
    }

    pub fn union(self, o: Needs) -> Needs {
        Needs {
            fbar1: self.fbar1 | o.fbar1,
            fbar2: self.fbar2 | o.fbar2,
            grad_fbar1: self.grad_fbar1 | o.grad_fbar1,
            grad_fbar2: self.grad_fbar2 | o.grad_fbar2,
            zeta: self.zeta | o.zeta,
            c_upsilon: self.c_upsilon | o.c_upsilon,
            c_phi: self.c_phi | o.c_phi,
            h_phi: self.h_phi | o.h_phi,
            c_psi: self.c_psi | o.c_psi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizeParams {
    pub sampler: SamplerParams,
    pub cell: CellParams,
    /// Step for y-gradients of averaged drifts.
    pub grad_h: f64,
}

impl Default for HomogenizeParams {
    fn default() -> Self {
        HomogenizeParams {
            sampler: SamplerParams::default(),
            cell: CellParams::default(),
            grad_h: 0.05,
        }
    }
}

/// Values and standard errors on the same lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub value: LatticeField,
    pub stderr: LatticeField,
}

impl Tabulated {
    pub fn field(&self) -> SharedField {
        Arc::new(self.value.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients {
    pub lattice: LatticeSpec,
    pub fbar1: Option<Tabulated>,
    pub fbar2: Option<Tabulated>,
    /// `d2 x d2` Jacobians. Standard errors are upper bounds that ignore the
    /// common-seed correlation.
    pub grad_fbar1: Option<Tabulated>,
    pub grad_fbar2: Option<Tabulated>,
    /// Raw `avg(Ftilde Upsilon^T)`.
    pub f_upsilon: Option<Tabulated>,
    /// `sqrt(sym avg(Ftilde Upsilon^T))`, clamped.
    pub zeta: Option<LatticeField>,
    pub cross_c_upsilon: Option<Tabulated>,
    pub cross_c_phi: Option<Tabulated>,
    pub cross_c_psi: Option<Tabulated>,
    pub cross_h_phi: Option<Tabulated>,
    /// Largest clamp seen while taking `zeta`.
    pub zeta_clamp: ClampReport,
}

/// Drops the time axis when no coefficient that enters an average depends on `t`.
pub fn collapse_time(spec: LatticeSpec, sys: &MultiscaleSystem) -> LatticeSpec {
    if sys.f.depends_on(|v| v == Var::T) {
        return spec;
    }
    LatticeSpec {
        t_nodes: vec![spec.t_nodes[0]],
        ..spec
    }
}

struct Builder {
    spec: LatticeSpec,
    k: usize,
    value: Vec<f64>,
    stderr: Vec<f64>,
}

impl Builder {
    fn new(spec: &LatticeSpec, k: usize) -> Self {
        Builder {
            spec: spec.clone(),
            k,
            value: Vec::with_capacity(spec.n_nodes() * k),
            stderr: Vec::with_capacity(spec.n_nodes() * k),
        }
    }

    fn push(&mut self, e: &Estimate) {
        self.value.extend_from_slice(&e.value);
        self.stderr.extend_from_slice(&e.stderr);
    }

    fn finish(self) -> Result<Tabulated> {
        Ok(Tabulated {
            value: LatticeField::new(self.spec.clone(), self.k, self.value)?,
            stderr: LatticeField::new(self.spec, self.k, self.stderr)?,
        })
    }
}

fn zeros(k: usize) -> Estimate {
    Estimate {
        value: vec![0.0; k],
        stderr: vec![0.0; k],
    }
}

fn sum(a: &Estimate, b: &Estimate) -> Estimate {
    Estimate {
        value: a.value.iter().zip(&b.value).map(|(x, y)| x + y).collect(),
        stderr: a.stderr.iter().zip(&b.stderr).map(|(x, y)| x.hypot(*y)).collect(),
    }
}

/// Frozen-measure cache: one sample when the fast law ignores `y`.
struct Measures<'a> {
    sys: &'a MultiscaleSystem,
    params: SamplerParams,
    fixed: Option<EmpiricalMeasure>,
}

impl<'a> Measures<'a> {
    fn new(sys: &'a MultiscaleSystem, params: SamplerParams, y0: &[f64]) -> Result<Self> {
        let fixed = if sys.fast_law_independent_of_y() {
            Some(sample_invariant(sys, y0, &params)?)
        } else {
            None
        };
        Ok(Measures { sys, params, fixed })
    }

    fn with<T>(&self, y: &[f64], f: impl FnOnce(&EmpiricalMeasure) -> Result<T>) -> Result<T> {
        match &self.fixed {
            Some(m) => f(m),
            None => f(&sample_invariant(self.sys, y, &self.params)?),
        }
    }
}

/// Estimates the requested quantities at every lattice node.
pub fn estimate_effective(
    sys: &MultiscaleSystem,
    needs: Needs,
    lattice: &LatticeSpec,
    params: &HomogenizeParams,
) -> Result<EffectiveCoefficients> {
    lattice.validate()?;
    if lattice.d2() != sys.d2 {
        return Err(Error::GridMismatch(format!(
            "lattice has {} y axes, system has d2 = {}",
            lattice.d2(),
            sys.d2
        )));
    }
    let d2 = sys.d2;
    let (c_on, h_on) = (sys.c_present(), sys.h_present());
    let measures = Measures::new(sys, params.sampler, &lattice.node(0).1)?;

    // c . grad Phi is zero without c, and Phi is zero without H.
    let c_phi_at = |t: f64, y: &[f64], m: &EmpiricalMeasure| -> Result<Estimate> {
        if !(c_on && h_on) {
            return Ok(zeros(d2));
        }
        cross_average(&CellContext::new(sys, m, params.cell), CrossKind::CPhi, t, y)
    };
    let fbar_at = |k: u8, t: f64, y: &[f64]| -> Result<Estimate> {
        measures.with(y, |m| {
            let f1 = averaged_drift(&CellContext::new(sys, m, params.cell), 1, t, y)?;
            if k == 1 {
                Ok(f1)
            } else {
                Ok(sum(&f1, &c_phi_at(t, y, m)?))
            }
        })
    };
    // central differences with common seeds; the reported error treats the
    // two sides as independent, which overstates it
    let grad_at = |k: u8, t: f64, y: &[f64]| -> Result<Estimate> {
        let h = params.grad_h;
        let mut out = zeros(d2 * d2);
        let mut yy = y.to_vec();
        for j in 0..d2 {
            yy[j] = y[j] + h;
            let up = fbar_at(k, t, &yy)?;
            yy[j] = y[j] - h;
            let um = fbar_at(k, t, &yy)?;
            yy[j] = y[j];
            for i in 0..d2 {
                out.value[i * d2 + j] = (up.value[i] - um.value[i]) / (2.0 * h);
                out.stderr[i * d2 + j] = up.stderr[i].hypot(um.stderr[i]) / (2.0 * h);
            }
        }
        Ok(out)
    };

    let mut b_f1 = Builder::new(lattice, d2);
    let mut b_f2 = Builder::new(lattice, d2);
    let mut b_g1 = Builder::new(lattice, d2 * d2);
    let mut b_g2 = Builder::new(lattice, d2 * d2);
    let mut b_m = Builder::new(lattice, d2 * d2);
    let mut zeta_vals = Vec::new();
    let mut b_cu = Builder::new(lattice, d2);
    let mut b_cp = Builder::new(lattice, d2);
    let mut b_cs = Builder::new(lattice, d2);
    let mut b_hp = Builder::new(lattice, d2 * d2);
    let mut clamp = ClampReport::default();

    for idx in 0..lattice.n_nodes() {
        let (t, y) = lattice.node(idx);
        measures.with(&y, |m| {
            let ctx = CellContext::new(sys, m, params.cell);
            let f1 = if needs.fbar1 || needs.fbar2 {
                Some(averaged_drift(&ctx, 1, t, &y)?)
            } else {
                None
            };
            let cp = if needs.c_phi || needs.fbar2 {
                Some(c_phi_at(t, &y, m)?)
            } else {
                None
            };
            if needs.fbar1 {
                b_f1.push(f1.as_ref().unwrap());
            }
            if needs.fbar2 {
                b_f2.push(&sum(f1.as_ref().unwrap(), cp.as_ref().unwrap()));
            }
            if needs.c_phi {
                b_cp.push(cp.as_ref().unwrap());
            }
            if needs.zeta {
                let z = effective_zeta(&ctx, t, &y)?;
                b_m.push(&z.m);
                zeta_vals.extend_from_slice(&z.zeta);
                if z.report.clamped > clamp.clamped {
                    clamp = z.report;
                }
            }
            if needs.c_upsilon {
                b_cu.push(&if c_on {
                    cross_average(&ctx, CrossKind::CUpsilon, t, &y)?
                } else {
                    zeros(d2)
                });
            }
            if needs.c_psi {
                b_cs.push(&if c_on && h_on {
                    cross_average(&ctx, CrossKind::CPsi, t, &y)?
                } else {
                    zeros(d2)
                });
            }
            if needs.h_phi {
                b_hp.push(&if h_on {
                    cross_average(&ctx, CrossKind::HPhi, t, &y)?
                } else {
                    zeros(d2 * d2)
                });
            }
            Ok(())
        })?;
        if needs.grad_fbar1 {
            b_g1.push(&grad_at(1, t, &y)?);
        }
        if needs.grad_fbar2 {
            b_g2.push(&grad_at(2, t, &y)?);
        }
    }

    let opt = |on: bool, b: Builder| if on { b.finish().map(Some) } else { Ok(None) };
    Ok(EffectiveCoefficients {
        lattice: lattice.clone(),
        fbar1: opt(needs.fbar1, b_f1)?,
        fbar2: opt(needs.fbar2, b_f2)?,
        grad_fbar1: opt(needs.grad_fbar1, b_g1)?,
        grad_fbar2: opt(needs.grad_fbar2, b_g2)?,
        f_upsilon: opt(needs.zeta, b_m)?,
        zeta: if needs.zeta {
            Some(LatticeField::new(lattice.clone(), d2 * d2, zeta_vals)?)
        } else {
            None
        },
        cross_c_upsilon: opt(needs.c_upsilon, b_cu)?,
        cross_c_phi: opt(needs.c_phi, b_cp)?,
        cross_c_psi: opt(needs.c_psi, b_cs)?,
        cross_h_phi: opt(needs.h_phi, b_hp)?,
        zeta_clamp: clamp,
    })
}

fn require<'e>(t: &'e Option<Tabulated>, tag: DevTag, what: &str) -> Result<&'e Tabulated> {
    t.as_ref().ok_or_else(|| Error::MissingComponent {
        tag: tag.to_string(),
        what: what.into(),
    })
}

/// `sqrt(2 sym M)` node by node; the factor 2 turns the one-sided average
/// `avg(g u^T)` into the long-run covariance rate of `int g`.
pub fn diffusion_root(m: &Tabulated) -> Result<(LatticeField, ClampReport)> {
    let k = m.value.k;
    let d = (k as f64).sqrt().round() as usize;
    let mut worst = ClampReport::default();
    let mut values = Vec::with_capacity(m.value.values.len());
    for idx in 0..m.value.spec.n_nodes() {
        let twice: Vec<f64> = m.value.node_value(idx).iter().map(|v| 2.0 * v).collect();
        let tol = 6.0 * m.stderr.node_value(idx).iter().fold(0.0f64, |a, b| a.max(*b));
        let (root, rep) = psd_sqrt(&twice, d, tol)?;
        if rep.clamped > worst.clamped {
            worst = rep;
        }
        values.extend(root);
    }
    Ok((LatticeField::new(m.value.spec.clone(), k, values)?, worst))
}

/// Assembles the limit equation for `tag` from already estimated components.
pub fn build_limit_spec(
    tag: DevTag,
    sys: &MultiscaleSystem,
    eff: &EffectiveCoefficients,
) -> Result<LimitSdeSpec> {
    let family = tag.family();
    let grad_fbar = if family == 2 {
        require(&eff.grad_fbar2, tag, "gradient of the second averaged drift")?
    } else {
        require(&eff.grad_fbar1, tag, "gradient of the first averaged drift")?
    }
    .field();
    let drift_extra = if tag.has_drift_extra() {
        Some(match family {
            0 => require(&eff.cross_c_upsilon, tag, "c . grad Upsilon")?.field(),
            1 => require(&eff.cross_c_phi, tag, "c . grad Phi")?.field(),
            _ => {
                let a = require(&eff.cross_c_upsilon, tag, "c . grad Upsilon")?;
                let b = require(&eff.cross_c_psi, tag, "c . grad Psi")?;
                Arc::new(a.value.zip_with(&b.value, |x, y| x + y)?) as SharedField
            }
        })
    } else {
        None
    };
    let sigma_extra = if tag.has_sigma_extra() {
        let m = if family == 0 {
            require(&eff.f_upsilon, tag, "Ftilde Upsilon^T")?
        } else {
            require(&eff.cross_h_phi, tag, "H Phi^T")?
        };
        Some(Arc::new(diffusion_root(m)?.0) as SharedField)
    } else {
        None
    };
    Ok(LimitSdeSpec::from_parts(
        tag,
        sys.d2,
        grad_fbar,
        LimitSdeSpec::grad_g_fields(sys.grad_y_g()),
        drift_extra,
        sigma_extra,
    ))
}

fn component_names(name: &str, k: usize, d2: usize) -> Vec<String> {
    if k == d2 {
        (0..k).map(|i| format!("{name}[{i}]")).collect()
    } else {
        (0..k)
            .map(|i| format!("{name}[{}][{}]", i / d2, i % d2))
            .collect()
    }
}

impl EffectiveCoefficients {
    fn tables(&self) -> Vec<(&'static str, &LatticeField, Option<&LatticeField>)> {
        let named: [(&'static str, &Option<Tabulated>); 9] = [
            ("fbar1", &self.fbar1),
            ("fbar2", &self.fbar2),
            ("grad_fbar1", &self.grad_fbar1),
            ("grad_fbar2", &self.grad_fbar2),
            ("f_upsilon", &self.f_upsilon),
            ("cross_c_upsilon", &self.cross_c_upsilon),
            ("cross_c_phi", &self.cross_c_phi),
            ("cross_c_psi", &self.cross_c_psi),
            ("cross_h_phi", &self.cross_h_phi),
        ];
        let mut out: Vec<_> = named
            .into_iter()
            .filter_map(|(n, t)| t.as_ref().map(|t| (n, &t.value, Some(&t.stderr))))
            .collect();
        if let Some(z) = self.zeta.as_ref() {
            out.push(("zeta", z, None));
        }
        out
    }

    /// Long format `t,y0,..,name,value,stderr`, one row per node and component.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d2 = self.lattice.d2();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..d2).map(|j| format!("y{j}")));
        header.extend(["name", "value", "stderr"].map(String::from));
        wr.write_record(&header).map_err(csv_err)?;
        for (name, value, stderr) in self.tables() {
            let names = component_names(name, value.k, d2);
            for idx in 0..self.lattice.n_nodes() {
                let (t, y) = self.lattice.node(idx);
                for (c, cname) in names.iter().enumerate() {
                    let mut row = vec![fmt17(t)];
                    row.extend(y.iter().map(|v| fmt17(*v)));
                    row.push(cname.clone());
                    row.push(fmt17(value.node_value(idx)[c]));
                    row.push(stderr.map_or_else(|| "NaN".into(), |s| fmt17(s.node_value(idx)[c])));
                    wr.write_record(&row).map_err(csv_err)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}
