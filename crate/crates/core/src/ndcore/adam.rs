use crate::ndcore::Mat;

/// Adam hyper-parameters. Weight decay enters as `g + weight_decay * theta`
/// before the moment updates, and only for tensors flagged as decayed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&self, param: &mut Mat, grad: &Mat, state: &mut AdamState, decay: bool) {
        debug_assert_eq!(param.shape(), grad.shape());
        debug_assert_eq!(param.shape(), state.m.shape());
        state.t += 1;
        let t = state.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let wd = if decay { self.weight_decay } else { 0.0 };
        let m = state.m.data_mut();
        let v = state.v.data_mut();
        for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
            let g = g + wd * *p;
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// First/second moments and step count for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Mat,
    pub v: Mat,
    pub t: u64,
}

impl AdamState {
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        Self {
            m: Mat::zeros(rows, cols),
            v: Mat::zeros(rows, cols),
            t: 0,
        }
    }
}
