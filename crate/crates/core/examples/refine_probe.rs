use alflow::diffops::ns_residuals;
use alflow::geometry::{generate_bifurcation, BifurcationParams, GeometryConfig};
use alflow::oracle::{label_shape, FluidConstants};

fn main() {
    let constants = FluidConstants::default();
    let u_max = 0.1;
    let mut decreasing = 0;
    for seed in 0..10u64 {
        let mut vals = Vec::new();
        for n in [512usize, 1024, 2048] {
            let params = BifurcationParams::straight_tube(2e-3, 1e-2, seed);
            let cfg = GeometryConfig::with_counts(n, 1024, 64);
            let shape = generate_bifurcation(&params, &cfg).unwrap();
            let field = label_shape(&shape, &constants, u_max / 2.0).unwrap();
            let res = ns_residuals(&shape, &field, &constants).unwrap();
            vals.push(res.continuity);
        }
        let mono = vals[0] > vals[1] && vals[1] > vals[2];
        if mono { decreasing += 1; }
        println!("seed {seed}: {:?} monotone={mono}", vals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
    }
    println!("monotone on {decreasing}/10 seeds");
}
