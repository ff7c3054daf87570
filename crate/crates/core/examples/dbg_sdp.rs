use nalgebra::{Matrix2, RowVector2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_mppi::barrier::BarrierRow;
use safe_mppi::conic::{
    grid_trust_region_oracle, solve_trust_region_sdp, MatrixNorm, SdpStatus, TrustRegionSdp,
};

fn random_instance(
    rng: &mut ChaCha8Rng,
    norm: MatrixNorm,
) -> (TrustRegionSdp, Vector2<f64>, Matrix2<f64>) {
    let witness_mu = Vector2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let witness_p = Matrix2::new(
        rng.gen_range(0.05..1.2),
        0.0,
        rng.gen_range(-0.8..0.8),
        rng.gen_range(0.05..1.2),
    );
    let c = rng.gen_range(0.5..3.0);
    let n_rows = rng.gen_range(1..=3);
    let rows = (0..n_rows)
        .map(|_| {
            let a = RowVector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v1 = a.x * witness_p.m11 + a.y * witness_p.m21;
            let v2 = a.y * witness_p.m22;
            let slack = rng.gen_range(0.05..1.5);
            let b = a.x * witness_mu.x + a.y * witness_mu.y - c * (v1 * v1 + v2 * v2) - slack;
            BarrierRow { a, b, h_value: 0.0 }
        })
        .collect();
    let problem = TrustRegionSdp {
        mu0: Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        p0: Matrix2::new(
            rng.gen_range(0.0..1.5),
            0.0,
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.5),
        ),
        rows,
        c,
        norm_p: norm,
    };
    (problem, witness_mu, witness_p)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for norm in [MatrixNorm::Frobenius, MatrixNorm::Spectral] {
        for i in 0..25 {
            let (p, wmu, wp) = random_instance(&mut rng, norm);
            let sol = solve_trust_region_sdp(&p);
            let oracle = grid_trust_region_oracle(&p, Some((wmu, wp)), 4.0, 18).unwrap();
            let bad_status = sol.status != SdpStatus::Optimal;
            let bad_cost = (sol.cost - oracle).abs() > 1e-3;
            if bad_status || bad_cost {
                println!(
                    "{norm:?} #{i}: status {:?} cost {} oracle {}",
                    sol.status, sol.cost, oracle
                );
                println!("  problem: {p:?}");
            }
        }
    }
    println!("done");
}
