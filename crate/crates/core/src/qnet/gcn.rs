use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{q_from, relu, relu_mask, Dense, Gradients, InputEncoding, QValues};
use crate::env::{Observation, ACTION_COUNT, FEATURES};

/// Three graph-convolution layers `F → h1 → h2 → |A|`, rectified on the
/// hidden layers and linear on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<Dense>,
    pub encoding: InputEncoding,
    /// Neighbour radius used to build the observation graph, m.
    pub d_min: f64,
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(adj: &Array2<f64>) -> Array2<f64> {
    let n = adj.nrows();
    let mut a = adj.clone();
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let inv_sqrt: Vec<f64> = a.sum_axis(Axis(1)).iter().map(|d| 1.0 / d.sqrt()).collect();
    for ((i, j), v) in a.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    a
}

/// Binary adjacency between present rows whose positions are within `d_min`.
/// Row 0 is the ego at the origin; the other rows hold ego-relative offsets.
pub fn adjacency_from_observation(obs: &Observation, d_min: f64) -> Array2<f64> {
    let n = obs.rows();
    let pos = |r: usize| if r == 0 { (0.0, 0.0) } else { (obs.matrix[[r, 1]], obs.matrix[[r, 2]]) };
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        if !obs.is_present(i) {
            continue;
        }
        for j in (i + 1)..n {
            if !obs.is_present(j) {
                continue;
            }
            let ((xi, yi), (xj, yj)) = (pos(i), pos(j));
            if (xi - xj).hypot(yi - yj) <= d_min {
                adj[[i, j]] = 1.0;
                adj[[j, i]] = 1.0;
            }
        }
    }
    adj
}

struct Cache {
    a_hat: Array2<f64>,
    ax: Array2<f64>,
    z1: Array2<f64>,
    ah1: Array2<f64>,
    z2: Array2<f64>,
    /// Row 0 of `Â·H2`.
    ah2: Array1<f64>,
}

impl GcnModel {
    pub fn new<R: Rng>(hidden: [usize; 2], encoding: InputEncoding, d_min: f64, rng: &mut R) -> Self {
        let dims = [FEATURES, hidden[0], hidden[1], ACTION_COUNT];
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Self { layers, encoding, d_min }
    }

    pub fn zeros(hidden: [usize; 2], encoding: InputEncoding, d_min: f64) -> Self {
        let dims = [FEATURES, hidden[0], hidden[1], ACTION_COUNT];
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, encoding, d_min }
    }

    fn run(&self, obs: &Observation) -> (QValues, Cache) {
        let a_hat = normalize_adjacency(&adjacency_from_observation(obs, self.d_min));
        let x = self.encoding.encode(obs);
        let [l0, l1, l2] = [&self.layers[0], &self.layers[1], &self.layers[2]];

        let ax = a_hat.dot(&x);
        let z1 = ax.dot(&l0.w) + &l0.b;
        let h1 = z1.mapv(relu);
        let ah1 = a_hat.dot(&h1);
        let z2 = ah1.dot(&l1.w) + &l1.b;
        let h2 = z2.mapv(relu);
        // Only the ego row of the last propagation is read out.
        let ah2 = a_hat.row(0).dot(&h2);
        let out = ah2.dot(&l2.w) + &l2.b;
        (q_from(out.view()), Cache { a_hat, ax, z1, ah1, z2, ah2 })
    }

    pub fn backward(&self, obs: &Observation, dq: &QValues) -> Gradients {
        let (_, c) = self.run(obs);
        let dq = Array1::from_iter(dq.iter().copied());
        let [l1, l2] = [&self.layers[1], &self.layers[2]];

        let g2 = Dense {
            w: c.ah2.view().insert_axis(Axis(1)).dot(&dq.view().insert_axis(Axis(0))),
            b: dq.clone(),
        };
        // dH2[i, :] = Â[0, i] · (W2 · dq)
        let back2 = l2.w.dot(&dq);
        let dh2 = c.a_hat.row(0).insert_axis(Axis(1)).dot(&back2.view().insert_axis(Axis(0)));
        let dz2 = dh2 * c.z2.mapv(relu_mask);
        let g1 = Dense { w: c.ah1.t().dot(&dz2), b: dz2.sum_axis(Axis(0)) };
        let dh1 = c.a_hat.t().dot(&dz2.dot(&l1.w.t()));
        let dz1 = dh1 * c.z1.mapv(relu_mask);
        let g0 = Dense { w: c.ax.t().dot(&dz1), b: dz1.sum_axis(Axis(0)) };
        vec![g0, g1, g2]
    }
}

pub fn gcn_forward(obs: &Observation, model: &GcnModel) -> QValues {
    model.run(obs).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_node_self_loop() {
        assert_eq!(normalize_adjacency(&array![[0.0]]), array![[1.0]]);
    }

    #[test]
    fn two_connected_nodes() {
        let a = normalize_adjacency(&array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(a.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = GcnModel::zeros([8, 8], InputEncoding::identity(), 25.0);
        let mut obs = Observation::zeros(4);
        obs.matrix.row_mut(0).assign(&array![1.0, 3.0, 4.0, 20.0, 0.0]);
        obs.matrix.row_mut(1).assign(&array![1.0, 10.0, 0.0, 1.0, 0.0]);
        assert_eq!(gcn_forward(&obs, &m), [0.0; 5]);
    }

    #[test]
    fn identity_stack_reproduces_ego_features() {
        let mut m = GcnModel::zeros([FEATURES, FEATURES], InputEncoding::identity(), 25.0);
        for l in &mut m.layers {
            l.w = Array2::eye(FEATURES);
        }
        let mut obs = Observation::zeros(3);
        obs.matrix.row_mut(0).assign(&array![1.0, 2.0, 8.0, 25.0, 0.5]);
        assert_eq!(gcn_forward(&obs, &m), [1.0, 2.0, 8.0, 25.0, 0.5]);
    }

    #[test]
    fn absent_rows_are_isolated() {
        let mut obs = Observation::zeros(3);
        obs.matrix.row_mut(0).assign(&array![1.0, 0.0, 0.0, 20.0, 0.0]);
        let adj = adjacency_from_observation(&obs, 25.0);
        assert!(adj.iter().all(|&v| v == 0.0));
    }
}
