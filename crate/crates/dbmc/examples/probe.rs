use std::time::Instant;
use dbmc::*;

fn main() {
    let preset = desk_preset();
    for threads in [1, 2] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let t0 = Instant::now();
        pool.install(|| build_database(&preset.model, &preset.nominals, preset.observable, 256, 1).unwrap());
        println!("{threads} thread(s): {:.2} s", t0.elapsed().as_secs_f64());
    }
}
