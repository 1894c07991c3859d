//! Generic minimizer of the augmented Lagrangian on a three-node path with
//! two-node cliques, used to check the closed-form block updates.
//!
//! The Lagrangian is evaluated from dense copies of the operators and
//! minimized by a finite-difference quadratic model (exact for quadratics),
//! a dense linear solve and, where a cone is involved, projected gradient
//! steps with a Jacobi eigen-solver.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qapsdp_core::admm::{update_block1, update_block3, update_y};
use qapsdp_core::{CoverStrategy, ProblemInstance, SdpModel, Sense, SolverConfig, SolverState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-8;

pub struct Dense {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub samplers: Vec<DMatrix<f64>>,
    pub interior: DMatrix<f64>,
}

pub fn densify(rows: usize, apply: impl Fn(&[f64]) -> Vec<f64>, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    let mut e = vec![0.0; cols];
    for c in 0..cols {
        e[c] = 1.0;
        let col = apply(&e);
        for r in 0..rows {
            out[(r, c)] = col[r];
        }
        e[c] = 0.0;
    }
    out
}

pub fn dense_ops(model: &SdpModel) -> Dense {
    let sys = &model.system;
    let d2 = model.layout.d().pow(2);
    Dense {
        a: densify(sys.a.nrows(), |x| sys.a.mul_vec(x), d2),
        b: sys.b.clone(),
        samplers: sys.samplers.iter().map(|s| densify(s.nrows(), |x| s.mul_vec(x), d2)).collect(),
        interior: densify(sys.interior.nrows(), |x| sys.interior.mul_vec(x), d2),
    }
}

pub fn toy() -> (SdpModel, Dense) {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 5.0, 1.0, 0.0, 3.0, 4.0, 1.5, 0.0]);
    let b = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
    let inst = ProblemInstance::new("path3", a, &b, Sense::Minimize).unwrap();
    let model = SdpModel::build(&inst, 2, CoverStrategy::Greedy).unwrap();
    assert_eq!(model.num_cliques(), 2);
    let ops = dense_ops(&model);
    (model, ops)
}

pub fn sym(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

pub fn random_state(model: &SdpModel, seed: u64) -> SolverState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SolverState::zeros(model);
    let (n, k, d) = (model.layout.n, model.layout.k, model.layout.d());
    for cl in &mut st.cliques {
        cl.x = sym(&mut rng, d);
        let f = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        cl.s = &f * f.transpose();
        cl.y = DVector::from_fn(cl.y.len(), |_, _| rng.random_range(-1.0..1.0));
        cl.z = sym(&mut rng, k * n).map(f64::abs);
        cl.w = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    }
    st.g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    st.t = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    st
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn mat_of(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Augmented Lagrangian without the cone indicators.
pub fn lagrangian(model: &SdpModel, ops: &Dense, st: &SolverState, rho: f64) -> f64 {
    let mut total = -st.t.sum();
    for (cl, c) in st.cliques.iter().zip(&model.solver_costs) {
        let mut r = vec_of(&cl.s) - vec_of(c) + ops.interior.transpose() * vec_of(&cl.z) + ops.a.transpose() * &cl.y;
        for (u, b) in ops.samplers.iter().enumerate() {
            r += b.transpose() * cl.w.column(u);
        }
        r += vec_of(&cl.x) / rho;
        total += -ops.b.dot(&cl.y) + 0.5 * rho * r.norm_squared();
    }
    for (i, slots) in model.cover.slots.iter().enumerate() {
        let mut v = &st.t + st.g.column(i) / rho;
        for sl in slots {
            v -= st.cliques[sl.clique].w.column(sl.local);
        }
        total += 0.5 * rho * v.norm_squared();
    }
    total
}

/// Block of free variables read from and written into a state.
pub trait Block {
    fn get(&self, st: &SolverState) -> DVector<f64>;
    fn set(&self, st: &mut SolverState, v: &DVector<f64>);
}

/// Gradient and Hessian of a quadratic by central differences with unit step.
pub fn quadratic_model(f: &dyn Fn(&DVector<f64>) -> f64, dim: usize) -> (DVector<f64>, DMatrix<f64>) {
    let zero = DVector::zeros(dim);
    let f0 = f(&zero);
    let unit = |i: usize| {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        e
    };
    let grad = DVector::from_fn(dim, |i, _| 0.5 * (f(&unit(i)) - f(&(-unit(i)))));
    let mut hess = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        hess[(i, i)] = f(&unit(i)) + f(&(-unit(i))) - 2.0 * f0;
        for j in 0..i {
            let (ei, ej) = (unit(i), unit(j));
            let v = 0.25 * (f(&(&ei + &ej)) - f(&(&ei - &ej)) - f(&(&ej - &ei)) + f(&(-&ei - &ej)));
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (grad, hess)
}

pub fn restricted<'a>(model: &'a SdpModel, ops: &'a Dense, st: &'a SolverState, block: &'a dyn Block, rho: f64) -> impl Fn(&DVector<f64>) -> f64 + 'a {
    move |v| {
        let mut trial = st.clone();
        block.set(&mut trial, v);
        lagrangian(model, ops, &trial, rho)
    }
}

/// Unconstrained minimizer of the quadratic block subproblem.
pub fn minimize_free(model: &SdpModel, ops: &Dense, st: &SolverState, block: &dyn Block, rho: f64) -> DVector<f64> {
    let f = restricted(model, ops, st, block, rho);
    let dim = block.get(st).len();
    let (g, h) = quadratic_model(&f, dim);
    h.lu().solve(&(-g)).expect("strictly convex block")
}

/// Projected gradient on the quadratic model; `project` maps onto the feasible set.
pub fn minimize_projected(
    model: &SdpModel,
    ops: &Dense,
    st: &SolverState,
    block: &dyn Block,
    rho: f64,
    project: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> DVector<f64> {
    let f = restricted(model, ops, st, block, rho);
    let dim = block.get(st).len();
    let (g, h) = quadratic_model(&f, dim);
    let lmax = jacobi_eigen(&h).0.iter().fold(0.0f64, |m, v| m.max(*v));
    let step = 1.0 / lmax;
    let mut v = project(&DVector::zeros(dim));
    for _ in 0..200_000 {
        let next = project(&(&v - (&h * &v + &g) * step));
        let change = (&next - &v).amax();
        v = next;
        if change < 1e-15 {
            break;
        }
    }
    v
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|ij| a[ij] * a[ij]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[(p, r)], a[(q, r)]);
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

pub fn jacobi_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let symm = (m + m.transpose()) * 0.5;
    let (vals, vecs) = jacobi_eigen(&symm);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let col = vecs.column(i);
            out += col * col.transpose() * l;
        }
    }
    out
}

pub struct TBlock;
impl Block for TBlock {
    fn get(&self, st: &SolverState) -> DVector<f64> {
        st.t.clone()
    }
    fn set(&self, st: &mut SolverState, v: &DVector<f64>) {
        st.t = v.clone();
    }
}

pub struct SBlock(pub usize);
impl Block for SBlock {
    fn get(&self, st: &SolverState) -> DVector<f64> {
        vec_of(&st.cliques[self.0].s)
    }
    fn set(&self, st: &mut SolverState, v: &DVector<f64>) {
        let d = st.cliques[self.0].s.nrows();
        st.cliques[self.0].s = mat_of(v, d);
    }
}

pub struct YBlock;
impl Block for YBlock {
    fn get(&self, st: &SolverState) -> DVector<f64> {
        DVector::from_iterator(st.cliques.iter().map(|c| c.y.len()).sum(), st.cliques.iter().flat_map(|c| c.y.iter().copied()))
    }
    fn set(&self, st: &mut SolverState, v: &DVector<f64>) {
        let mut o = 0;
        for c in &mut st.cliques {
            let m = c.y.len();
            c.y = v.rows(o, m).into_owned();
            o += m;
        }
    }
}

/// `z` of every clique followed by `w` of every clique.
pub struct ZwBlock;
impl ZwBlock {
    pub fn z_len(st: &SolverState) -> usize {
        st.cliques.iter().map(|c| c.z.len()).sum()
    }
}
impl Block for ZwBlock {
    fn get(&self, st: &SolverState) -> DVector<f64> {
        let z = st.cliques.iter().flat_map(|c| c.z.iter().copied());
        let w = st.cliques.iter().flat_map(|c| c.w.iter().copied());
        let all: Vec<f64> = z.chain(w).collect();
        DVector::from_vec(all)
    }
    fn set(&self, st: &mut SolverState, v: &DVector<f64>) {
        let mut o = 0;
        for c in &mut st.cliques {
            let (r, k) = c.z.shape();
            c.z = DMatrix::from_column_slice(r, k, &v.as_slice()[o..o + r * k]);
            o += r * k;
        }
        for c in &mut st.cliques {
            let (r, k) = c.w.shape();
            c.w = DMatrix::from_column_slice(r, k, &v.as_slice()[o..o + r * k]);
            o += r * k;
        }
    }
}

pub fn cfg(rho: f64) -> SolverConfig {
    SolverConfig { rho, threads: Some(1), ..SolverConfig::default() }
}


/// Largest deviation of the `t`, `s`, `y` and `(z, w)` updates from the
/// generic minimizer over a few random states and penalties.
pub fn update_deviations() -> [f64; 4] {
    let (model, ops) = toy();
    let d = model.layout.d();
    let mut dev = [0.0f64; 4];
    for (seed, rho) in [(21, 1.0), (22, 0.3), (23, 3.0)] {
        let st = random_state(&model, seed);
        let mut b1 = st.clone();
        update_block1(&mut b1, &model, &cfg(rho)).unwrap();
        dev[0] = dev[0].max((&b1.t - minimize_free(&model, &ops, &st, &TBlock, rho)).amax());
        for r in 0..model.num_cliques() {
            let project = |v: &DVector<f64>| vec_of(&jacobi_psd(&mat_of(v, d)));
            let oracle = mat_of(&minimize_projected(&model, &ops, &st, &SBlock(r), rho, &project), d);
            dev[1] = dev[1].max((&b1.cliques[r].s - oracle).amax());
        }
        let mut y = st.clone();
        update_y(&mut y, &model, &cfg(rho));
        dev[2] = dev[2].max((YBlock.get(&y) - minimize_free(&model, &ops, &st, &YBlock, rho)).amax());
        let zl = ZwBlock::z_len(&st);
        let project = |v: &DVector<f64>| DVector::from_fn(v.len(), |i, _| if i < zl { v[i].max(0.0) } else { v[i] });
        let mut zw = st.clone();
        update_block3(&mut zw, &model, &cfg(rho));
        dev[3] = dev[3].max((ZwBlock.get(&zw) - minimize_projected(&model, &ops, &st, &ZwBlock, rho, &project)).amax());
    }
    dev
}
