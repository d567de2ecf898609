//! Prints the calibration runs behind `fraclab_core::constants`.
//!
//! cargo run --release -p fraclab-core --example calibrate

use fraclab_core::duality::DualityContext;
use fraclab_core::experiments::{incidence_case, incidence_case_specs, sharpness_scale};

fn main() -> fraclab_core::Result<()> {
    for d in 2..=4 {
        let ctx = DualityContext::calibrate(d, 200_000, 7)?;
        println!("duality d={d} r_d={:.6}", ctx.r_d);
    }

    let mut k6_max = 0.0f64;
    let mut k6_min = f64::INFINITY;
    for (s, t) in [(0.5, 1.5), (0.25, 1.25)] {
        for k in 6..=10 {
            let r = sharpness_scale(s, t, k)?;
            println!("frostman s={s} t={t} k={k} best_constant={:.4}", r.frostman_constant);
            if k == 6 {
                k6_max = k6_max.max(r.frostman_constant);
                k6_min = k6_min.min(r.frostman_constant);
            }
        }
    }
    println!("frostman k=6 range [{k6_min:.4}, {k6_max:.4}], ceiling 10x min = {:.4}", 10.0 * k6_min);

    let mut worst = 0.0f64;
    for (kind, s, t, k) in incidence_case_specs() {
        let c = incidence_case(kind, s, t, k, 0)?;
        println!(
            "incidence {:<28} |P|={:<7} |L|={:<6} |I|={:<8} rhs={:<12.1} ratio={:.4}",
            c.label, c.points, c.lines, c.incidences, c.bound_rhs, c.ratio
        );
        worst = worst.max(c.ratio);
    }
    println!("incidence max ratio {worst:.4}");
    Ok(())
}
