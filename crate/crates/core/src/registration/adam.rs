/// Adaptive-moment gradient descent over per-voxel 3-vectors.
///
/// Components whose gradient is exactly zero are left alone, moments
/// included. Voxels over flat image regions get no signal, and letting stale
/// momentum carry them would move the field where the objective cannot see.
#[derive(Debug, Clone)]
pub struct Adam {
    step_size: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<[f64; 3]>,
    v: Vec<[f64; 3]>,
}

impl Adam {
    pub fn new(len: usize, step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step_size,
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![[0.0; 3]; len],
            v: vec![[0.0; 3]; len],
        }
    }

    pub fn step(&mut self, params: &mut [[f64; 3]], grad: &[[f64; 3]]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for c in 0..3 {
                if g[c] == 0.0 {
                    continue;
                }
                m[c] = self.beta1 * m[c] + (1.0 - self.beta1) * g[c];
                v[c] = self.beta2 * v[c] + (1.0 - self.beta2) * g[c] * g[c];
                let m_hat = m[c] / bc1;
                let v_hat = v[c] / bc2;
                p[c] -= self.step_size * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_step_size() {
        let mut adam = Adam::new(1, 0.5, 0.9, 0.999, 1e-8);
        let mut p = [[1.0, -1.0, 0.0]];
        adam.step(&mut p, &[[3.0, -0.01, 0.0]]);
        assert!((p[0][0] - 0.5).abs() < 1e-7);
        assert!((p[0][1] + 0.5).abs() < 1e-5);
        assert_eq!(p[0][2], 0.0);
    }

    #[test]
    fn zero_gradient_freezes_component() {
        let mut adam = Adam::new(1, 0.5, 0.9, 0.999, 1e-8);
        let mut p = [[0.0; 3]];
        adam.step(&mut p, &[[1.0, 1.0, 0.0]]);
        adam.step(&mut p, &[[1.0, 0.0, 0.0]]);
        assert!((p[0][0] + 1.0).abs() < 1e-7);
        assert!((p[0][1] + 0.5).abs() < 1e-7);
        assert_eq!(p[0][2], 0.0);
    }

    #[test]
    fn minimises_quadratic() {
        let mut adam = Adam::new(1, 0.05, 0.9, 0.999, 1e-8);
        let mut p = [[3.0, -2.0, 1.0]];
        for _ in 0..2000 {
            let g = [[2.0 * p[0][0], 2.0 * p[0][1], 2.0 * p[0][2]]];
            adam.step(&mut p, &g);
        }
        assert!(p[0].iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }
}
