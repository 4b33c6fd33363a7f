//! Parameter update rules: plain SGD, RMSProp and Adam with bias correction.
//!
//! Each rule walks the network's parameter tensors in canonical order and
//! keeps one moment buffer per tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GradientSet, Network};
use crate::tensor::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn with_kind(kind: OptimizerKind) -> Self {
        OptimizerConfig {
            kind,
            ..Default::default()
        }
    }

    /// A zero learning rate is accepted: it is the null update used to check
    /// that training with frozen weights is inert.
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(unit(self.beta1) && unit(self.beta2) && unit(self.rho)) {
            return Err(Error::config("beta1, beta2 and rho must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    /// Adam first moment; unused by the other rules.
    pub first_moment: Vec<Vec<f64>>,
    /// Adam second moment / RMSProp running mean square.
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.param_slices().map(|s| vec![0.0; s.len()]).collect();
        OptimizerState {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn is_congruent(&self, net: &Network) -> bool {
        let lens: Vec<usize> = net.param_slices().map(<[f64]>::len).collect();
        let same = |m: &Vec<Vec<f64>>| m.len() == lens.len() && m.iter().zip(&lens).all(|(a, &b)| a.len() == b);
        same(&self.first_moment) && same(&self.second_moment)
    }
}

fn check_grads(net: &Network, grads: &GradientSet) -> Result<()> {
    if !grads.is_congruent(net) {
        return Err(ShapeError::new("optimizer step", format!("{} params", net.num_params()), "incongruent gradients").into());
    }
    Ok(())
}

fn check_state(state: &OptimizerState, net: &Network) -> Result<()> {
    if !state.is_congruent(net) {
        return Err(ShapeError::new("optimizer step", format!("{} params", net.num_params()), "incongruent state").into());
    }
    Ok(())
}

/// `w ← w − lr·g`
pub fn sgd_step(net: &mut Network, grads: &GradientSet, cfg: &OptimizerConfig) -> Result<()> {
    check_grads(net, grads)?;
    let lr = cfg.learning_rate;
    for (w, g) in net.param_slices_mut().zip(grads.slices()) {
        for (w, g) in w.iter_mut().zip(g) {
            *w -= lr * g;
        }
    }
    Ok(())
}

/// `v ← ρ·v + (1−ρ)·g²`, `w ← w − lr·g/(√v + ε)`
pub fn rmsprop_step(
    state: &mut OptimizerState,
    net: &mut Network,
    grads: &GradientSet,
    cfg: &OptimizerConfig,
) -> Result<()> {
    check_grads(net, grads)?;
    check_state(state, net)?;
    state.step += 1;
    let (lr, rho, eps) = (cfg.learning_rate, cfg.rho, cfg.epsilon);
    for ((w, g), v) in net
        .param_slices_mut()
        .zip(grads.slices())
        .zip(state.second_moment.iter_mut())
    {
        for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = rho * *v + (1.0 - rho) * g * g;
            *w -= lr * g / (v.sqrt() + eps);
        }
    }
    Ok(())
}

/// Adam with bias-corrected moments:
/// `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`, `w ← w − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(
    state: &mut OptimizerState,
    net: &mut Network,
    grads: &GradientSet,
    cfg: &OptimizerConfig,
) -> Result<()> {
    check_grads(net, grads)?;
    check_state(state, net)?;
    state.step += 1;
    let t = state.step as i32;
    let (lr, b1, b2, eps) = (cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((w, g), m), v) in net
        .param_slices_mut()
        .zip(grads.slices())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// A configured rule paired with its state, owned alongside one network.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, net: &Network) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            config,
            state: OptimizerState::new(net),
        })
    }

    pub fn step(&mut self, net: &mut Network, grads: &GradientSet) -> Result<()> {
        match self.config.kind {
            OptimizerKind::Sgd => {
                self.state.step += 1;
                sgd_step(net, grads, &self.config)
            }
            OptimizerKind::Rmsprop => rmsprop_step(&mut self.state, net, grads, &self.config),
            OptimizerKind::Adam => adam_step(&mut self.state, net, grads, &self.config),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};
    use crate::tensor::{Matrix, Vector};

    fn scalar_net(w: f64) -> Network {
        Network::from_parts(
            vec![LayerSpec::new(1, 1, Activation::Linear, 0.0)],
            vec![Matrix::filled(1, 1, w)],
            vec![Vector::zeros(1)],
        )
        .unwrap()
    }

    fn grad(g: f64) -> GradientSet {
        GradientSet {
            weights: vec![Matrix::filled(1, 1, g)],
            biases: vec![Vector::zeros(1)],
        }
    }

    fn w(net: &Network) -> f64 {
        net.weights()[0].get(0, 0)
    }

    #[test]
    fn sgd_examples() {
        let cfg = OptimizerConfig { learning_rate: 0.1, ..OptimizerConfig::with_kind(OptimizerKind::Sgd) };
        let mut net = scalar_net(1.0);
        sgd_step(&mut net, &grad(0.5), &cfg).unwrap();
        assert_eq!(w(&net), 0.95);

        let before = Network::init(&LayerSpec::stack(3, 5, 2, 0.0), 1).unwrap();
        let mut after = before.clone();
        sgd_step(&mut after, &GradientSet::zeros_like(&before), &cfg).unwrap();
        assert_eq!(before, after);

        let mut twice = scalar_net(1.0);
        sgd_step(&mut twice, &grad(0.5), &cfg).unwrap();
        sgd_step(&mut twice, &grad(0.5), &cfg).unwrap();
        assert!((w(&twice) - (1.0 - 2.0 * 0.1 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_first_step() {
        let cfg = OptimizerConfig { learning_rate: 0.01, ..OptimizerConfig::with_kind(OptimizerKind::Rmsprop) };
        for g in [0.3, -2.0, 1e-4] {
            let mut net = scalar_net(0.0);
            let mut st = OptimizerState::new(&net);
            rmsprop_step(&mut st, &mut net, &grad(g), &cfg).unwrap();
            let expected = -0.01 * g / ((0.1 * g * g).sqrt() + 1e-8);
            assert!((w(&net) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rmsprop_zero_gradient_decays_state() {
        let cfg = OptimizerConfig::with_kind(OptimizerKind::Rmsprop);
        let mut net = scalar_net(2.0);
        let mut st = OptimizerState::new(&net);
        st.second_moment[0][0] = 4.0;
        rmsprop_step(&mut st, &mut net, &grad(0.0), &cfg).unwrap();
        assert_eq!(w(&net), 2.0);
        assert!((st.second_moment[0][0] - 3.6).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_damps_gradient_scale() {
        let cfg = OptimizerConfig::with_kind(OptimizerKind::Rmsprop);
        let step = |g: f64| {
            let mut net = scalar_net(0.0);
            let mut st = OptimizerState::new(&net);
            rmsprop_step(&mut st, &mut net, &grad(g), &cfg).unwrap();
            w(&net).abs()
        };
        let ratio = step(5.0) / step(0.5);
        assert!(ratio < 1.01, "ratio {ratio}");
    }

    #[test]
    fn adam_first_step_is_sign_sized() {
        let cfg = OptimizerConfig::default();
        for g in [1e-3, 0.7, -50.0, 1e6] {
            let mut net = scalar_net(1.0);
            let mut st = OptimizerState::new(&net);
            adam_step(&mut st, &mut net, &grad(g), &cfg).unwrap();
            let dw = w(&net) - 1.0;
            let expected = cfg.learning_rate * g.abs() / (g.abs() + cfg.epsilon);
            assert!((dw.abs() - expected).abs() < 1e-9);
            assert!(dw.abs() <= cfg.learning_rate * (1.0 + 1e-12));
            assert_eq!(dw.signum(), -g.signum());
        }
    }

    #[test]
    fn adam_zero_gradient_is_inert() {
        let mut net = Network::init(&LayerSpec::stack(3, 4, 1, 0.0), 0).unwrap();
        let before = net.clone();
        let mut st = OptimizerState::new(&net);
        let zeros = GradientSet::zeros_like(&net);
        for _ in 0..3 {
            adam_step(&mut st, &mut net, &zeros, &OptimizerConfig::default()).unwrap();
        }
        assert_eq!(net, before);
        assert!(st.is_congruent(&net));
    }

    #[test]
    fn incongruent_inputs_are_rejected() {
        let mut net = scalar_net(1.0);
        let other = Network::init(&LayerSpec::stack(3, 4, 1, 0.0), 0).unwrap();
        let cfg = OptimizerConfig::default();
        assert!(sgd_step(&mut net, &GradientSet::zeros_like(&other), &cfg).is_err());
        let mut st = OptimizerState::new(&other);
        assert!(adam_step(&mut st, &mut net, &grad(1.0), &cfg).is_err());
        assert!(rmsprop_step(&mut st, &mut net, &grad(1.0), &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { learning_rate: -1.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { beta2: 1.0, ..Default::default() }.validate().is_err());
    }
}
