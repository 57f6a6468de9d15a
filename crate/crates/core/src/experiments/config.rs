use crate::dsl::{parse_expression, EvalArgs, Expr, Var};
use crate::error::{Error, Result};
use crate::model::{MultiscaleSystem, ScaleSchedule};
use crate::sde::{check_stiffness, TimeGrid, STIFFNESS_FRACTION};

/// A bounded test function of the deviation `z`, written in the expression
/// language with variables `z1..zd`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctional {
    pub name: String,
    pub expr: Expr,
}

impl TestFunctional {
    pub fn parse(name: &str, src: &str) -> Result<Self> {
        let expr = parse_expression(src)?;
        if let Some(v) = expr.variables().into_iter().find(|v| !matches!(v, Var::Z(_))) {
            return Err(Error::Validation(format!(
                "test functional \"{name}\" may only use z variables, found {v}"
            )));
        }
        Ok(TestFunctional {
            name: name.to_string(),
            expr,
        })
    }

    /// `cos(<lambda, z>)`
    pub fn cos(lambda: &[f64]) -> Self {
        let inner = lambda
            .iter()
            .enumerate()
            .map(|(i, l)| format!("({l:?})*z{}", i + 1))
            .collect::<Vec<_>>()
            .join(" + ");
        let name = format!(
            "cos_{}",
            lambda
                .iter()
                .map(|l| format!("{l}"))
                .collect::<Vec<_>>()
                .join("_")
        );
        TestFunctional::parse(&name, &format!("cos({inner})")).expect("generated expression parses")
    }

    /// `1 / (1 + |z|^2)`
    pub fn inverse_quadratic(d2: usize) -> Self {
        let sq = (1..=d2)
            .map(|i| format!("z{i}^2"))
            .collect::<Vec<_>>()
            .join(" + ");
        TestFunctional::parse("inv_quad", &format!("1/(1 + {sq})")).expect("generated expression parses")
    }

    /// `tanh(z_i)`, zero-based `i`.
    pub fn tanh(i: usize) -> Self {
        TestFunctional::parse(&format!("tanh_{}", i + 1), &format!("tanh(z{})", i + 1))
            .expect("generated expression parses")
    }

    /// The default registry for dimension `d2`.
    pub fn registry(d2: usize) -> Vec<Self> {
        let mut out = vec![
            TestFunctional::cos(&vec![1.0; d2]),
            TestFunctional::inverse_quadratic(d2),
        ];
        out.extend((0..d2).map(TestFunctional::tanh));
        out
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        Ok(self.expr.eval(&EvalArgs::new(0.0, &[], &[]).with_z(z))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Strictly decreasing, inside (0, 1).
    pub eps_list: Vec<f64>,
    pub n_mc: usize,
    /// Step as a fraction of `alpha^2`.
    pub dt_fraction: f64,
    pub horizon: f64,
    pub q: f64,
    pub master_seed: u64,
    pub functionals: Vec<TestFunctional>,
    /// Number of intervals between sup-checkpoints.
    pub checkpoints: usize,
    /// Largest tolerated fraction of exploded replicas.
    pub explosion_cap: f64,
}

impl ExperimentConfig {
    /// `eps = 2^-4 .. 2^-8`, 200 replicas, `T = 1`, `q = 2`.
    pub fn desk(d2: usize) -> Self {
        ExperimentConfig {
            eps_list: (4..=8).map(|k| 2f64.powi(-k)).collect(),
            n_mc: 200,
            dt_fraction: STIFFNESS_FRACTION,
            horizon: 1.0,
            q: 2.0,
            master_seed: 0,
            functionals: TestFunctional::registry(d2),
            checkpoints: 16,
            explosion_cap: 0.05,
        }
    }

    pub fn validate(&self, sched: &ScaleSchedule) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Validation("eps_list is empty".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Validation(format!(
                "every eps must lie in (0,1): {:?}",
                self.eps_list
            )));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Validation(format!(
                "eps_list must be strictly decreasing: {:?}",
                self.eps_list
            )));
        }
        if self.n_mc < 2 {
            return Err(Error::Validation("n_mc must be at least 2".into()));
        }
        if !(self.horizon > 0.0) || !(self.q > 0.0) || self.checkpoints == 0 {
            return Err(Error::Validation(format!(
                "need horizon > 0, q > 0 and checkpoints >= 1 (got {}, {}, {})",
                self.horizon, self.q, self.checkpoints
            )));
        }
        if !(0.0..=1.0).contains(&self.explosion_cap) {
            return Err(Error::Validation(format!(
                "explosion_cap must lie in [0,1], got {}",
                self.explosion_cap
            )));
        }
        if !(self.dt_fraction > 0.0) {
            return Err(Error::Validation(format!(
                "dt_fraction must be positive, got {}",
                self.dt_fraction
            )));
        }
        for &e in &self.eps_list {
            check_stiffness(self.grid(sched, e)?.dt, sched.alpha(e))?;
        }
        Ok(())
    }

    /// Grid on `[0, T]` with `dt <= dt_fraction * alpha^2`.
    pub fn grid(&self, sched: &ScaleSchedule, eps: f64) -> Result<TimeGrid> {
        let a = sched.alpha(eps);
        TimeGrid::covering(self.horizon, self.dt_fraction * a * a)
    }

    /// Total fine steps per replica summed over the eps list.
    pub fn steps_per_replica(&self, sched: &ScaleSchedule) -> Result<usize> {
        self.eps_list
            .iter()
            .map(|&e| self.grid(sched, e).map(|g| g.n_steps))
            .sum()
    }

    pub fn check_functionals(&self, sys: &MultiscaleSystem) -> Result<()> {
        for f in &self.functionals {
            f.eval(&vec![0.0; sys.d2])
                .map_err(|e| Error::Validation(format!("test functional \"{}\": {e}", f.name)))?;
        }
        Ok(())
    }
}

/// Worker pool honoring `MSLAB_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MSLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("MSLAB_THREADS must be a positive integer, got \"{v}\"")))?;
        if n == 0 {
            return Err(Error::Config("MSLAB_THREADS must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_values() {
        let r = TestFunctional::registry(2);
        let names: Vec<&str> = r.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["cos_1_1", "inv_quad", "tanh_1", "tanh_2"]);
        let z = [0.3, -0.7];
        assert!((r[0].eval(&z).unwrap() - (-0.4f64).cos()).abs() < 1e-15);
        assert!((r[1].eval(&z).unwrap() - 1.0 / (1.0 + 0.09 + 0.49)).abs() < 1e-15);
        assert!((r[3].eval(&z).unwrap() - (-0.7f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn functionals_reject_other_variables() {
        assert!(TestFunctional::parse("bad", "cos(x1)").is_err());
        assert!(TestFunctional::parse("one", "1").is_ok());
    }

    #[test]
    fn validation() {
        let s = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let mut c = ExperimentConfig::desk(1);
        c.validate(&s).unwrap();
        c.eps_list = vec![0.1, 0.2, 0.05];
        assert!(c.validate(&s).is_err());
        c = ExperimentConfig::desk(1);
        c.dt_fraction = 0.1;
        assert!(matches!(c.validate(&s), Err(Error::Stiffness { .. })));
    }

    #[test]
    fn grid_respects_the_step_bound() {
        let s = ScaleSchedule::new(1.0, 0.0, 0.0).unwrap();
        let c = ExperimentConfig::desk(1);
        let g = c.grid(&s, 0.25).unwrap();
        assert_eq!(g.n_steps, 320);
        assert!(g.dt <= 0.0625 / 20.0);
    }
}
