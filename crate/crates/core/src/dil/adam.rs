use super::{ModelGrads, TrainConfig};
use crate::error::{Error, Result};
use crate::lcnn::LcnnModel;

pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, shaped like the model's taps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &LcnnModel) -> Self {
        let zeros: Vec<Vec<f64>> = model
            .layers()
            .iter()
            .map(|l| vec![0.0; l.taps().len()])
            .collect();
        Self {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    model: &mut LcnnModel,
    grads: &ModelGrads,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let layers = model.layers_mut();
    let shapes_ok = grads.len() == layers.len()
        && state.first_moment.len() == layers.len()
        && layers.iter().zip(grads).zip(&state.first_moment).all(|((l, g), m)| {
            l.taps().len() == g.len() && g.len() == m.len()
        });
    if !shapes_ok {
        return Err(Error::contract("gradient shape does not match model"));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (l, layer) in layers.iter_mut().enumerate() {
        let m = &mut state.first_moment[l];
        let v = &mut state.second_moment[l];
        for (i, w) in layer.taps_mut().iter_mut().enumerate() {
            let g = grads[l][i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcnn::{init_model, InitScheme, Topology};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> LcnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        init_model(&mut rng, &Topology::uniform(3, 2).unwrap(), InitScheme::ScaledNormal).unwrap()
    }

    fn zero_grads(m: &LcnnModel) -> ModelGrads {
        m.layers().iter().map(|l| vec![0.0; l.taps().len()]).collect()
    }

    #[test]
    fn zero_gradient_leaves_model() {
        let mut m = model();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        adam_step(&mut m, &zero_grads(&before), &mut st, &TrainConfig::default()).unwrap();
        assert_eq!(m, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = model();
        let before = m.clone();
        let mut g = zero_grads(&m);
        g[1][4] = -3.7;
        let cfg = TrainConfig::default();
        let mut st = AdamState::new(&m);
        adam_step(&mut m, &g, &mut st, &cfg).unwrap();
        let delta = m.layers()[1].taps()[4] - before.layers()[1].taps()[4];
        assert!((delta - cfg.learning_rate).abs() < 1e-10, "{delta}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut m = model();
        let mut g = zero_grads(&m);
        g[0].pop();
        let mut st = AdamState::new(&m);
        assert!(adam_step(&mut m, &g, &mut st, &TrainConfig::default()).is_err());
    }
}
