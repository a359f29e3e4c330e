//! Trainable parameters, Adam updates and global-norm gradient clipping.

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// One trainable tensor with its gradient and Adam state.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
    pub grad: Vec<f32>,
    pub m1: Vec<f32>,
    pub m2: Vec<f32>,
    pub step: u64,
}

/// All parameters of a model, in registration order. Registration order is
/// part of the checkpoint contract, so it must be deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> ParamId {
        let name = name.into();
        assert!(
            self.id_of(&name).is_none(),
            "duplicate parameter name '{name}'"
        );
        let numel: usize = shape.iter().product();
        assert_eq!(
            values.len(),
            numel,
            "parameter '{name}' values do not match shape {shape:?}"
        );
        let id = ParamId(self.params.len());
        self.params.push(Parameter {
            name,
            shape,
            grad: vec![0.0; numel],
            m1: vec![0.0; numel],
            m2: vec![0.0; numel],
            step: 0,
            values,
        });
        id
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar weights.
    pub fn weight_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }
}

/// Scales all gradients by `max_norm / g` when the global L2 norm `g`
/// exceeds `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm(store: &mut ParamStore, max_norm: f32) -> f32 {
    let mut sq = 0.0f64;
    for p in store.iter() {
        for &g in &p.grad {
            sq += (g as f64) * (g as f64);
        }
    }
    let norm = sq.sqrt() as f32;
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for p in store.iter_mut() {
            for g in &mut p.grad {
                *g *= scale;
            }
        }
    }
    norm
}

/// One bias-corrected Adam step over every parameter; gradients are zeroed
/// afterwards.
pub fn adam_step(store: &mut ParamStore, lr: f32, betas: (f32, f32), eps: f32) {
    let (b1, b2) = betas;
    for p in store.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let corr1 = 1.0 - b1.powi(t);
        let corr2 = 1.0 - b2.powi(t);
        for k in 0..p.values.len() {
            let g = p.grad[k];
            p.m1[k] = b1 * p.m1[k] + (1.0 - b1) * g;
            p.m2[k] = b2 * p.m2[k] + (1.0 - b2) * g * g;
            let m_hat = p.m1[k] / corr1;
            let v_hat = p.m2[k] / corr2;
            p.values[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.grad.fill(0.0);
    }
}

pub const ADAM_BETAS: (f32, f32) = (0.9, 0.999);
pub const ADAM_EPS: f32 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(grads: &[(&str, Vec<f32>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (name, g) in grads {
            let id = s.add(*name, vec![g.len()], vec![1.0; g.len()]);
            s.get_mut(id).grad = g.clone();
        }
        s
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut s = store_with(&[("a", vec![0.1, 0.2])]);
        let norm = clip_global_norm(&mut s, 1.0);
        assert!(norm < 1.0);
        assert_eq!(s.get(ParamId(0)).grad, vec![0.1, 0.2]);
    }

    #[test]
    fn clip_scales_a_3_4_vector_to_unit_norm() {
        let mut s = store_with(&[("a", vec![3.0, 4.0])]);
        let norm = clip_global_norm(&mut s, 1.0);
        assert!((norm - 5.0).abs() < 1e-6);
        let g = &s.get(ParamId(0)).grad;
        assert!((g[0] - 0.6).abs() < 1e-6);
        assert!((g[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn multi_parameter_clip_matches_flattened_oracle() {
        let ga = vec![1.0, -2.0, 0.5];
        let gb = vec![3.0, 0.25];
        let mut s = store_with(&[("a", ga.clone()), ("b", gb.clone())]);
        let max_norm = 1.5;
        let norm = clip_global_norm(&mut s, max_norm);

        // oracle: flatten into one vector and clip that
        let flat: Vec<f32> = ga.iter().chain(&gb).copied().collect();
        let flat_norm = (flat.iter().map(|&x| (x as f64).powi(2)).sum::<f64>()).sqrt() as f32;
        assert!((norm - flat_norm).abs() < 1e-6);
        let scale = if flat_norm > max_norm {
            max_norm / flat_norm
        } else {
            1.0
        };
        let expect: Vec<f32> = flat.iter().map(|&x| x * scale).collect();
        let got: Vec<f32> = s
            .get(ParamId(0))
            .grad
            .iter()
            .chain(&s.get(ParamId(1)).grad)
            .copied()
            .collect();
        for (e, g) in expect.iter().zip(&got) {
            assert!((e - g).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_leaves_parameters_alone_on_zero_grad() {
        let mut s = ParamStore::new();
        let id = s.add("w", vec![2], vec![1.5, -0.5]);
        adam_step(&mut s, 0.1, ADAM_BETAS, ADAM_EPS);
        assert_eq!(s.get(id).values, vec![1.5, -0.5]);
    }

    #[test]
    fn first_adam_step_moves_by_about_lr() {
        let mut s = ParamStore::new();
        let id = s.add("w", vec![1], vec![0.7]);
        s.get_mut(id).grad = vec![0.013];
        adam_step(&mut s, 0.01, ADAM_BETAS, ADAM_EPS);
        let delta = (0.7 - s.get(id).values[0]).abs();
        assert!((delta - 0.01).abs() < 1e-4, "first-step magnitude {delta}");
        assert_eq!(s.get(id).grad, vec![0.0], "grads zeroed after step");
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut s = ParamStore::new();
        let id = s.add("w", vec![1], vec![1.0]);
        let mut last = 1.0f32;
        for _ in 0..5 {
            let w = s.get(id).values[0];
            s.get_mut(id).grad = vec![2.0 * w];
            adam_step(&mut s, 0.05, ADAM_BETAS, ADAM_EPS);
            let f = s.get(id).values[0].powi(2);
            assert!(f < last, "f(w) must strictly decrease, {f} !< {last}");
            last = f;
        }
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::new();
        s.add("w", vec![1], vec![0.0]);
        s.add("w", vec![1], vec![0.0]);
    }
}
