use criterion::{black_box, criterion_group, criterion_main, Criterion};

use implreg_core::matfac::{
    factor_gradients, init_unbalanced, make_analyzed_task, make_dxd_task, product_ode_step, NetDims,
};
use implreg_core::rng::{gaussian_vec, stream, streams};
use implreg_core::tenfac::{cp_compose, cp_loss_and_grads, gen_ground_truth};
use implreg_core::{svd, CpModel, Matrix, TensorTask};

fn linalg(c: &mut Criterion) {
    let mut rng = stream(0, streams::MONTE_CARLO);
    for n in [2usize, 8, 32] {
        let m = Matrix::new(n, n, gaussian_vec(&mut rng, n * n, 1.0)).unwrap();
        c.bench_function(&format!("svd {n}x{n}"), |b| b.iter(|| svd(black_box(&m)).unwrap()));
    }
}

fn matfac(c: &mut Criterion) {
    let task = make_analyzed_task();
    let net = init_unbalanced(NetDims::square(2), 3, 1e-2, &mut stream(0, streams::FACTORS)).unwrap();
    c.bench_function("factor gradients depth 3, 2x2", |b| b.iter(|| factor_gradients(black_box(&net), &task).unwrap()));

    let wide = make_dxd_task(3, 4).unwrap();
    let net = init_unbalanced(NetDims::minimal(3, 4), 3, 1e-2, &mut stream(0, streams::FACTORS)).unwrap();
    c.bench_function("factor gradients depth 3, 3x4", |b| b.iter(|| factor_gradients(black_box(&net), &wide).unwrap()));

    let w = Matrix::from_rows(&[&[0.5, 1.0], &[1.0, 2.0]]).unwrap();
    c.bench_function("product ODE step depth 3", |b| {
        b.iter(|| product_ode_step(black_box(&w), &task, 3, 1e-3).unwrap())
    });
}

fn tenfac(c: &mut Criterion) {
    let dims = [8usize, 8, 8];
    let truth = gen_ground_truth(&dims, 1, 101).unwrap();
    let task = TensorTask::sample(&truth, 300, &mut stream(0, streams::OBSERVATIONS)).unwrap();
    let model = CpModel::random(&dims, 64, 1e-2, &mut stream(0, streams::FACTORS)).unwrap();
    c.bench_function("cp loss and gradients 8^3, rank 64, 300 obs", |b| {
        b.iter(|| cp_loss_and_grads(black_box(&model), &task).unwrap())
    });
    c.bench_function("cp compose 8^3, rank 64", |b| b.iter(|| cp_compose(black_box(&model))));
}

criterion_group!(benches, linalg, matfac, tenfac);
criterion_main!(benches);
