use super::network::NetworkParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, lr: 1e-3, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam decay rates must lie in [0, 1)"));
        }
        if !(self.lr > 0.0) || !(self.eps > 0.0) {
            return Err(Error::invalid("Adam learning rate and epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one array per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Number of updates applied so far.
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Result<Self> {
        let lens: Vec<usize> = params.blocks().iter().map(|b| b.values.len()).collect();
        Self::for_lengths(&lens, config)
    }

    pub fn for_lengths(lens: &[usize], config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            config,
        })
    }

    /// One bias-corrected Adam update over matching parameter and gradient
    /// blocks. Nothing is modified if any gradient is non-finite.
    pub fn step_blocks(&mut self, params: Vec<&mut Vec<f64>>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("parameter, gradient and moment block counts differ"));
        }
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::shape(format!("block {i}: parameter and gradient lengths differ")));
            }
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient block {i}, element {j}")));
            }
        }

        self.t += 1;
        let AdamConfig { beta1, beta2, lr, eps } = self.config;
        let exponent = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(exponent);
        let c2 = 1.0 - beta2.powi(exponent);
        for ((theta, g), (m, v)) in params.into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..theta.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam update of `grads` to `params`.
pub fn adam_step(params: &mut NetworkParams, grads: &NetworkParams, state: &mut AdamState) -> Result<()> {
    let g: Vec<&[f64]> = grads.blocks().into_iter().map(|b| b.values).collect();
    state.step_blocks(params.blocks_mut(), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_with_unit_gradient() {
        let mut state = AdamState::for_lengths(&[1], AdamConfig::default()).unwrap();
        let mut theta = vec![0.0];
        state.step_blocks(vec![&mut theta], vec![&[1.0]]).unwrap();
        assert_eq!(state.t, 1);
        assert!((state.m[0][0] - 0.1).abs() < 1e-15);
        assert!((state.v[0][0] - 0.001).abs() < 1e-15);
        assert!((theta[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);

        state.step_blocks(vec![&mut theta], vec![&[1.0]]).unwrap();
        // bias correction keeps m̂ = v̂ = 1 for a constant gradient
        let c1 = 1.0 - 0.9f64.powi(2);
        let c2 = 1.0 - 0.999f64.powi(2);
        assert!((state.m[0][0] / c1 - 1.0).abs() < 1e-12);
        assert!((state.v[0][0] / c2 - 1.0).abs() < 1e-12);
        assert!((theta[0] + 2e-3).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut state = AdamState::for_lengths(&[3], AdamConfig::default()).unwrap();
        state.m[0] = vec![0.5, -0.2, 0.0];
        state.v[0] = vec![0.1, 0.3, 0.0];
        state.t = 4;
        let mut theta = vec![1.0, -2.0, 3.0];
        let before = theta.clone();
        state.step_blocks(vec![&mut theta], vec![&[0.0, 0.0, 0.0]]).unwrap();
        assert!((state.m[0][0] - 0.45).abs() < 1e-15);
        assert!(state.v[0][1] < 0.3);
        // moments are non-zero so θ still moves by the decayed momentum
        assert_ne!(theta, before);

        let mut fresh = AdamState::for_lengths(&[3], AdamConfig::default()).unwrap();
        let mut theta = before.clone();
        fresh.step_blocks(vec![&mut theta], vec![&[0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut state = AdamState::for_lengths(&[2], AdamConfig::default()).unwrap();
        let mut theta = vec![1.0, 1.0];
        let err = state.step_blocks(vec![&mut theta], vec![&[0.5, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(theta, vec![1.0, 1.0]);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn invalid_hyperparameters() {
        for cfg in [
            AdamConfig { beta1: 1.0, ..Default::default() },
            AdamConfig { beta2: -0.1, ..Default::default() },
            AdamConfig { lr: 0.0, ..Default::default() },
            AdamConfig { eps: 0.0, ..Default::default() },
        ] {
            assert!(AdamState::for_lengths(&[1], cfg).is_err());
        }
    }
}
