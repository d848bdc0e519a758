use ndarray::{Array1, Axis};
use rand::Rng;

use super::{q_from, relu, relu_mask, Dense, Gradients, InputEncoding, QValues};
use crate::env::{Observation, ACTION_COUNT, FEATURES};

/// Dense network over the row-major flattened `V×F` observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    pub encoding: InputEncoding,
    /// Observation rows `V` the input layer expects.
    pub rows: usize,
}

impl MlpModel {
    pub fn new<R: Rng>(rows: usize, hidden: [usize; 2], encoding: InputEncoding, rng: &mut R) -> Self {
        let dims = [rows * FEATURES, hidden[0], hidden[1], ACTION_COUNT];
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Self { layers, encoding, rows }
    }

    pub fn zeros(rows: usize, hidden: [usize; 2], encoding: InputEncoding) -> Self {
        let dims = [rows * FEATURES, hidden[0], hidden[1], ACTION_COUNT];
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, encoding, rows }
    }

    fn input(&self, obs: &Observation) -> Array1<f64> {
        assert_eq!(obs.rows(), self.rows, "observation rows do not match the MLP input width");
        Array1::from_iter(self.encoding.encode(obs).iter().copied())
    }

    pub fn backward(&self, obs: &Observation, dq: &QValues) -> Gradients {
        let x = self.input(obs);
        let [l0, l1, l2] = [&self.layers[0], &self.layers[1], &self.layers[2]];
        let z1 = x.dot(&l0.w) + &l0.b;
        let h1 = z1.mapv(relu);
        let z2 = h1.dot(&l1.w) + &l1.b;
        let h2 = z2.mapv(relu);

        let dq = Array1::from_iter(dq.iter().copied());
        let outer = |a: &Array1<f64>, b: &Array1<f64>| a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)));
        let g2 = Dense { w: outer(&h2, &dq), b: dq.clone() };
        let dz2 = l2.w.dot(&dq) * z2.mapv(relu_mask);
        let g1 = Dense { w: outer(&h1, &dz2), b: dz2.clone() };
        let dz1 = l1.w.dot(&dz2) * z1.mapv(relu_mask);
        let g0 = Dense { w: outer(&x, &dz1), b: dz1 };
        vec![g0, g1, g2]
    }
}

pub fn mlp_forward(obs: &Observation, model: &MlpModel) -> QValues {
    let x = model.input(obs);
    let [l0, l1, l2] = [&model.layers[0], &model.layers[1], &model.layers[2]];
    let h1 = (x.dot(&l0.w) + &l0.b).mapv(relu);
    let h2 = (h1.dot(&l1.w) + &l1.b).mapv(relu);
    let out = h2.dot(&l2.w) + &l2.b;
    q_from(out.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(2, [4, 4], InputEncoding::identity());
        let mut obs = Observation::zeros(2);
        obs.matrix.row_mut(0).assign(&array![1.0, 5.0, 4.0, 22.0, 0.0]);
        assert_eq!(mlp_forward(&obs, &m), [0.0; 5]);
    }

    #[test]
    fn identity_pass_through() {
        let mut m = MlpModel::zeros(1, [FEATURES, FEATURES], InputEncoding::identity());
        for l in &mut m.layers {
            l.w = Array2::eye(FEATURES);
        }
        let mut obs = Observation::zeros(1);
        obs.matrix.row_mut(0).assign(&array![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(mlp_forward(&obs, &m), [1.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
