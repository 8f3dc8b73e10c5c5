use super::observable::{Observable, Scratch};
use crate::error::{LabError, Result};
use crate::systems::System;

/// `φ(x) = (h(x), h(Tx), …, h(T^{k−1}x))`.
#[derive(Clone, Debug)]
pub struct DelayMap {
    pub observable: Observable,
    pub k: usize,
    pub system: System,
}

impl DelayMap {
    pub fn new(observable: Observable, k: usize, system: System) -> Result<Self> {
        if k == 0 {
            return Err(LabError::InvalidParameter("delay dimension k must be ≥ 1".into()));
        }
        if observable.probes().basis.vars() != system.dim() {
            return Err(LabError::DimensionMismatch {
                expected: system.dim(),
                got: observable.probes().basis.vars(),
            });
        }
        Ok(Self { observable, k, system })
    }

    /// `h` along the first `len` points of the orbit of `x`, written to `out`.
    /// Returns the last orbit point visited.
    pub fn observe_orbit(&self, x: &[f64], out: &mut [f64], s: &mut Scratch) -> Result<Vec<f64>> {
        let n = self.system.dim();
        if x.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, got: x.len() });
        }
        let mut cur = x.to_vec();
        let mut next = vec![0.0; n];
        let len = out.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.observable.eval_with(&cur, s);
            if i + 1 < len {
                self.system.step_into(&cur, &mut next)?;
                std::mem::swap(&mut cur, &mut next);
            }
        }
        Ok(cur)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        self.observe_orbit(x, &mut out, &mut self.observable.scratch())?;
        Ok(out)
    }

    /// `(φ(x), φ(Tx))` sharing one orbit of length `k + 1`.
    pub fn pair(&self, x: &[f64], s: &mut Scratch) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut obs = vec![0.0; self.k + 1];
        self.observe_orbit(x, &mut obs, s)?;
        Ok((obs[..self.k].to_vec(), obs[1..].to_vec()))
    }
}

/// Free-function form of [`DelayMap::apply`].
pub fn delay_map(x: &[f64], dm: &DelayMap) -> Result<Vec<f64>> {
    dm.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{probe_basis, BaseObservable, Probes};
    use crate::systems::SystemSpec;
    use std::f64::consts::PI;

    fn solenoid_h0(k: usize) -> DelayMap {
        let sys = SystemSpec::solenoid().build().unwrap();
        let probes = Probes::for_system(probe_basis(3, k, None).unwrap(), &sys).unwrap();
        DelayMap::new(Observable::new(BaseObservable::CosAngle, probes), k, sys).unwrap()
    }

    #[test]
    fn solenoid_hand_values() {
        let dm = solenoid_h0(2);
        assert_eq!(dm.apply(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        let v = dm.apply(&[PI / 3.0, 0.0, 0.0]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn identity_delay_vector_is_constant() {
        let sys = SystemSpec::identity(2).unwrap().build().unwrap();
        let probes = Probes::for_system(probe_basis(2, 3, None).unwrap(), &sys).unwrap();
        let h = Observable::new(BaseObservable::Coord(1), probes);
        let dm = DelayMap::new(h, 3, sys).unwrap();
        assert_eq!(dm.apply(&[0.1, 0.7]).unwrap(), vec![0.7; 3]);
    }

    #[test]
    fn rejects_k_zero() {
        let dm = solenoid_h0(1);
        assert!(DelayMap::new(dm.observable.clone(), 0, dm.system.clone()).is_err());
    }
}
