use bessel_hardy::factorization::*;
use bessel_hardy::kernels::KernelRegimeConstants;
use bessel_hardy::measure::{measure, Interval};
use bessel_hardy::*;

fn test_atom(lam: BesselParam, p: f64, x0: f64, r: f64) -> Atom {
    let interval = Interval::new(x0, r).unwrap();
    let m = measure(&interval, lam);
    let h = m.powf(-1.0 / p);
    let mid = 0.5 * (interval.lo() + interval.hi());
    let m_left = bessel_hardy::measure::measure_endpoints(interval.lo(), mid, lam);
    let m_right = bessel_hardy::measure::measure_endpoints(mid, interval.hi(), lam);
    let profile = StepFunction::new(
        vec![interval.lo(), mid, interval.hi()],
        vec![h, -h * m_left / m_right],
    )
    .unwrap();
    Atom::new(interval, profile, p, lam).unwrap()
}

fn main() {
    let spec = QuadratureSpec { rel_tol: 1e-9, max_subdivisions: 60, nodes_per_panel: 12 };
    let regime = KernelRegimeConstants { k1: 0.999, k2: 0.499, c_k1: 1.27, c_k2: 0.12 };
    for lam_v in [0.5, 1.0, 2.0] {
        let lam = BesselParam::new(lam_v).unwrap();
        for p in [0.85, 0.95, 1.0] {
            if !bessel_hardy::measure::p_range(lam).contains(p) { continue; }
            let base = ConstantSchedule::derive(lam, p, 1.0/16.0, &regime).unwrap();
            for mult in [1.0, 4.0, 16.0] {
                let schedule = ConstantSchedule { m: base.m * mult, ..base };
                let mut line = format!("lam={lam_v} p={p} M={}: ", schedule.m);
                for (x0, r) in [(1.0, 0.25), (1.0, 0.9999), (16384.0 * 4.0, 1.0)] {
                    let atom = test_atom(lam, p, x0, r);
                    match approximate_atom(&atom, &schedule, lam, &spec, &SamplingConfig::default(), None) {
                        Ok(a) => line.push_str(&format!("{}:eps={:.4} ", a.pair.case_tag, a.certified_eps)),
                        Err(e) => line.push_str(&format!("ERR({e}) ")),
                    }
                }
                println!("{line}");
            }
        }
    }
}
