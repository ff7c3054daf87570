use nalgebra::{Matrix2, RowVector2, Vector2};
use safe_mppi::barrier::BarrierRow;
use safe_mppi::conic::{grid_trust_region_oracle, solve_trust_region_sdp, MatrixNorm, TrustRegionSdp};

fn main() {
    let p = TrustRegionSdp {
        mu0: Vector2::new(0.9351271399688814, -1.133446228272346),
        p0: Matrix2::new(1.2296494046200448, 0.0, -0.23404357455582359, 1.145797985959424),
        rows: vec![
            BarrierRow { a: RowVector2::new(1.8849537470042073, -1.8959302354541627), b: -2.12012438641239, h_value: 0.0 },
            BarrierRow { a: RowVector2::new(1.177674129898433, -1.1732583402273482), b: -0.6717050542596462, h_value: 0.0 },
            BarrierRow { a: RowVector2::new(-1.4410535918562255, 1.5479956428461845), b: -0.780318855296669, h_value: 0.0 },
        ],
        c: 1.0864050382952446,
        norm_p: MatrixNorm::Frobenius,
    };
    let sol = solve_trust_region_sdp(&p);
    println!("status {:?} cost {} mu {:?} p {:?}", sol.status, sol.cost, sol.mu.as_slice(), sol.p.as_slice());
    let oracle = grid_trust_region_oracle(&p, None, 4.0, 18);
    println!("oracle {:?}", oracle);
}
