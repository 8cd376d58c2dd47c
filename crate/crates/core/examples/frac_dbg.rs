use bessel_hardy::*;
use bessel_hardy::operators::fractional_integral;

fn main() {
    let lam = BesselParam::new(1.0).unwrap();
    let f = StepFunction::indicator(0.5, 1.5).unwrap();
    let g = f.add(&StepFunction::new(vec![0.6, 0.9], vec![2.0]).unwrap());
    for max_sub in [60u32, 150, 400] {
        let spec = QuadratureSpec { max_subdivisions: max_sub, ..Default::default() };
        let mut line = format!("max_sub {max_sub}: ");
        for x in [0.62f64, 0.7, 0.93, 1.0] {
            match fractional_integral(&g, 0.25, x, lam, &spec) {
                Ok(v) => line.push_str(&format!("x={x}: {v:.9}  ")),
                Err(e) => line.push_str(&format!("x={x}: ERR({e})  ")),
            }
        }
        println!("{line}");
    }
}
