use crate::nn::{DenseMatrix, GcnGrads, GcnParams};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn like(t: &DenseMatrix) -> Self {
        Self {
            m: vec![0.0; t.data().len()],
            v: vec![0.0; t.data().len()],
        }
    }
}

/// First/second moment accumulators for W0, Θ and Θ_ss.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    w0: Moments,
    head_target: Moments,
    head_ss: Option<Moments>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &GcnParams) -> Self {
        Self {
            step: 0,
            w0: Moments::like(&params.w0),
            head_target: Moments::like(&params.head_target),
            head_ss: params.head_ss.as_ref().map(Moments::like),
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

fn update(
    param: &mut [f64],
    grad: &[f64],
    decay_from: Option<f64>,
    mom: &mut Moments,
    lr: f64,
    state: (f64, f64, f64, f64, f64),
) {
    let (b1, b2, eps, c1, c2) = state;
    for i in 0..param.len() {
        let mut g = grad[i];
        if let Some(wd) = decay_from {
            g += wd * param[i];
        }
        mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
        mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
        let m_hat = mom.m[i] / c1;
        let v_hat = mom.v[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam over a single tensor, weight decay applied as an L2 gradient term.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TensorAdam {
    step: u64,
    mom: Moments,
}

impl TensorAdam {
    pub(crate) fn new(t: &DenseMatrix) -> Self {
        Self {
            step: 0,
            mom: Moments::like(t),
        }
    }

    pub(crate) fn step(&mut self, param: &mut DenseMatrix, grad: &DenseMatrix, lr: f64, weight_decay: f64) {
        self.step += 1;
        let t = self.step as i32;
        let consts = (BETA1, BETA2, EPSILON, 1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        let decay = (weight_decay != 0.0).then_some(weight_decay);
        update(param.data_mut(), grad.data(), decay, &mut self.mom, lr, consts);
    }
}

/// One bias-corrected Adam step. Weight decay enters as an L2 gradient
/// term on W0 only. Heads without a gradient are left untouched.
pub fn adam_step(
    params: &mut GcnParams,
    grads: &GcnGrads,
    state: &mut AdamState,
    learning_rate: f64,
    weight_decay: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let consts = (
        state.beta1,
        state.beta2,
        state.epsilon,
        1.0 - state.beta1.powi(t),
        1.0 - state.beta2.powi(t),
    );
    update(
        params.w0.data_mut(),
        grads.w0.data(),
        (weight_decay != 0.0).then_some(weight_decay),
        &mut state.w0,
        learning_rate,
        consts,
    );
    if let Some(g) = &grads.head_target {
        update(
            params.head_target.data_mut(),
            g.data(),
            None,
            &mut state.head_target,
            learning_rate,
            consts,
        );
    }
    if let (Some(g), Some(p)) = (&grads.head_ss, params.head_ss.as_mut()) {
        let mom = state.head_ss.get_or_insert_with(|| Moments::like(p));
        update(p.data_mut(), g.data(), None, mom, learning_rate, consts);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(v: f64) -> GcnParams {
        GcnParams {
            w0: DenseMatrix::from_rows(&[vec![v]]),
            head_target: DenseMatrix::from_rows(&[vec![v]]),
            head_ss: None,
        }
    }

    fn grads(g: f64) -> GcnGrads {
        GcnGrads {
            w0: DenseMatrix::from_rows(&[vec![g]]),
            head_target: Some(DenseMatrix::from_rows(&[vec![g]])),
            head_ss: None,
        }
    }

    #[test]
    fn zero_gradients_leave_params() {
        let mut p = scalar_params(0.7);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grads(0.0), &mut s, 0.01, 0.0);
        assert_eq!(p, scalar_params(0.7));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.002, 150.0] {
            let mut p = scalar_params(1.0);
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &grads(g), &mut s, 0.01, 0.0);
            let moved = 1.0 - p.w0[(0, 0)];
            assert!((moved - 0.01 * g.signum()).abs() < 1e-6, "{g}: {moved}");
        }
    }

    /// Plain scalar Adam written independently of the tensor code.
    fn scalar_reference(mut x: f64, grads: &[f64], lr: f64) -> f64 {
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        x
    }

    #[test]
    fn matches_scalar_reference() {
        let seq = [0.5, -1.25, 2.0, 0.125, -0.75];
        let mut p = scalar_params(0.3);
        let mut s = AdamState::new(&p);
        for g in seq {
            adam_step(&mut p, &grads(g), &mut s, 0.05, 0.0);
        }
        let expected = scalar_reference(0.3, &seq, 0.05);
        assert!((p.head_target[(0, 0)] - expected).abs() < 1e-12);
        assert!((p.w0[(0, 0)] - expected).abs() < 1e-12);
        assert_eq!(s.step(), 5);
    }

    #[test]
    fn weight_decay_only_on_extractor() {
        let mut p = scalar_params(1.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grads(0.0), &mut s, 0.01, 5e-4);
        assert!(p.w0[(0, 0)] < 1.0);
        assert_eq!(p.head_target[(0, 0)], 1.0);
    }
}
