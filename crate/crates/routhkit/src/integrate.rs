//! Fixed-step RK4 integration and trajectory containers.

use indexmap::IndexMap;

use crate::error::{Result, RouthError};

/// Time-stamped states with named per-sample diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: IndexMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, state: Vec<f64>) {
        self.times.push(t);
        self.states.push(state);
    }

    /// Attach a diagnostic column. Its length must match the sample count.
    pub fn set_diagnostic(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(RouthError::Argument(format!(
                "diagnostic {name} has {} values for {} samples",
                values.len(),
                self.len()
            )));
        }
        self.diagnostics.insert(name.to_string(), values);
        Ok(())
    }

    /// Checks the container invariants: strictly increasing times and one
    /// state per time.
    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.times.len() {
            return Err(RouthError::Argument("states and times differ in length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RouthError::Argument("times are not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// Column `k` of the states.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }
}

/// Integration aborted by a field evaluation error. Carries everything
/// computed before the failure.
#[derive(Debug, Clone)]
pub struct IntegrationFailure {
    pub partial: Trajectory,
    pub t: f64,
    pub cause: RouthError,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "integration failed at t = {}: {}", self.t, self.cause)
    }
}

impl std::error::Error for IntegrationFailure {}

impl From<IntegrationFailure> for RouthError {
    fn from(e: IntegrationFailure) -> Self {
        RouthError::Integration { t: e.t, cause: Box::new(e.cause) }
    }
}

/// Uniform grid `t0 + k dt` with a final shortened step landing on `tf`.
pub fn time_grid(t0: f64, tf: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(RouthError::Argument(format!("dt must be positive, got {dt}")));
    }
    if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(RouthError::Argument(format!("need tf > t0, got t0 = {t0}, tf = {tf}")));
    }
    // Steps closer than 1e-9 dt to tf are merged into the final step.
    let n = ((tf - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    grid.push(tf);
    Ok(grid)
}

/// One classical RK4 step.
pub fn rk4_step<F>(field: &mut F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = field(t, y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = field(t + 0.5 * h, &y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = field(t + 0.5 * h, &y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = field(t + h, &y4)?;
    let out: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(RouthError::NonFinite("RK4 step".into()));
    }
    Ok(out)
}

/// RK4 over an explicit increasing time grid.
pub fn rk4_on_grid<F>(mut field: F, y0: &[f64], grid: &[f64]) -> Result<Trajectory, IntegrationFailure>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut traj = Trajectory::new();
    if grid.is_empty() {
        return Ok(traj);
    }
    traj.push(grid[0], y0.to_vec());
    for w in grid.windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let y = traj.states.last().expect("non-empty");
        match rk4_step(&mut field, t, y, t_next - t) {
            Ok(y_next) => traj.push(t_next, y_next),
            Err(cause) => return Err(IntegrationFailure { partial: traj, t, cause }),
        }
    }
    Ok(traj)
}

/// Classical fixed-step RK4 from `t0` to `tf`.
pub fn rk4<F>(field: F, y0: &[f64], t0: f64, tf: f64, dt: f64) -> Result<Trajectory, IntegrationFailure>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let grid = time_grid(t0, tf, dt).map_err(|cause| IntegrationFailure {
        partial: Trajectory::new(),
        t: t0,
        cause,
    })?;
    rk4_on_grid(field, y0, &grid)
}

/// Piecewise cubic Hermite interpolant through samples with known
/// derivatives.
#[derive(Debug, Clone)]
pub struct HermiteCurve {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl HermiteCurve {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, slopes: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.len() != slopes.len() || times.is_empty() {
            return Err(RouthError::Argument("Hermite samples are inconsistent".into()));
        }
        Ok(Self { times, values, slopes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value_at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Interpolated value at `t`, clamped to the sampled interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if n == 1 {
            return self.values[0].clone();
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let s = ((t - ta) / h).clamp(0.0, 1.0);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        (0..self.values[k].len())
            .map(|i| {
                h00 * self.values[k][i]
                    + h10 * h * self.slopes[k][i]
                    + h01 * self.values[k + 1][i]
                    + h11 * h * self.slopes[k + 1][i]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_stays_constant() {
        let tr = rk4(|_, _| Ok(vec![0.0]), &[1.0], 0.0, 2.0, 0.1).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 1.0));
    }

    #[test]
    fn exponential_growth() {
        let tr = rk4(|_, y| Ok(vec![y[0]]), &[1.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!((tr.last_state().unwrap()[0] - std::f64::consts::E).abs() < 1e-10);
    }

    #[test]
    fn last_step_lands_on_tf() {
        let g = time_grid(0.0, 1.05, 0.1).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(*g.last().unwrap(), 1.05);
        assert!((g[10] - 1.0).abs() < 1e-15);
        let g = time_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(time_grid(0.0, 1.0, 0.0).is_err());
        assert!(time_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn failure_keeps_partial_trajectory() {
        let err = rk4(
            |t, _| if t > 0.5 { Err(RouthError::Domain("stop".into())) } else { Ok(vec![1.0]) },
            &[0.0],
            0.0,
            1.0,
            0.1,
        )
        .unwrap_err();
        assert!(err.partial.len() >= 5);
        assert!(err.partial.validate().is_ok());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let ts = vec![0.0, 0.5, 1.3];
        let c = HermiteCurve::new(
            ts.clone(),
            ts.iter().map(|&t| vec![f(t)]).collect(),
            ts.iter().map(|&t| vec![df(t)]).collect(),
        )
        .unwrap();
        for &t in &[0.1, 0.5, 0.77, 1.29] {
            assert!((c.eval(t)[0] - f(t)).abs() < 1e-13);
        }
    }
}
