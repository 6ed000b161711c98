use nalgebra::{DMatrix, DVector};
use stabaaa_core::sdp::solver::*;

fn main() {
    // arrow test: Y pinned to I, min r s.t. [[r, bᵀ],[b, Y]] ⪰ 0
    let n = 2;
    let n_sym = 3;
    let b = DVector::from_row_slice(&[0.6, -0.8]);
    let mut h3 = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        h3[(i + 1, 0)] = b[i];
        h3[(0, i + 1)] = b[i];
    }
    let mut e0 = DVector::zeros(n + 1);
    e0[0] = 1.0;
    let mut e0h = DVector::zeros(n + 1);
    e0h[0] = 0.5;
    let mut objective = vec![0.0; n_sym + 1];
    objective[n_sym] = 1.0;
    let problem = SdpProblem {
        y_dim: n,
        num_scalars: 1,
        objective,
        blocks: vec![
            Block {
                dim: n,
                h: -DMatrix::identity(n, n),
                y_map: Some(YMap::Identity),
                scalars: vec![],
            },
            Block {
                dim: n,
                h: DMatrix::identity(n, n),
                y_map: Some(YMap::Lyapunov(DMatrix::identity(n, n) * 0.5)),
                scalars: vec![],
            },
            Block {
                dim: n + 1,
                h: h3,
                y_map: Some(YMap::Arrow(DVector::zeros(n))),
                scalars: vec![(0, ScalarCoeff::LowRank(vec![(e0, e0h)]))],
            },
        ],
    };
    let settings = SolverSettings { verbose: true, max_iters: 60, ..Default::default() };
    let out = solve(&problem, &settings).unwrap();
    println!("status {:?} r {} iters {} Y {:?}", out.status, out.x[n_sym], out.iterations, out.y_mat);
}
