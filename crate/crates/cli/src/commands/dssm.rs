use panotrack_core::mot_io::write_atomic;
use panotrack_core::ssm_block::{check_invariants, dssm_forward, random_map, CheckOutcome, DssmParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::DssmArgs;
use crate::failure::{CliResult, Failure};

fn print(o: &CheckOutcome) {
    let mark = if o.passed { "PASS" } else { "FAIL" };
    if o.detail.is_empty() {
        println!("[{mark}] {}", o.name);
    } else {
        println!("[{mark}] {}: {}", o.name, o.detail);
    }
}

pub fn run(args: &DssmArgs) -> CliResult<()> {
    if let Some(path) = &args.write_params {
        let p = DssmParams::random(args.channels, args.kernels, args.scans, args.seed)?;
        write_atomic(path, p.to_json().as_bytes())?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let mut outcomes = check_invariants(args.seed)?;
    if let Some(path) = &args.params {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let p = DssmParams::from_json(&text)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let x = random_map((1, p.channels, 8, 6), &mut rng);
        let y = dssm_forward(&x, &p)?;
        outcomes.push(CheckOutcome {
            name: format!("parameter file {}", path.display()),
            passed: y.shape() == x.shape() && y.iter().all(|v| v.is_finite()),
            detail: format!("output {:?}", y.shape()),
        });
    }
    outcomes.iter().for_each(print);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::validation(format!("{failed} invariant check(s) failed")))
    }
}
