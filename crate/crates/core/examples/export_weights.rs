//! Saves a policy in the binary weight format, reads the header back by hand
//! the way an external consumer would, and checks the round trip.

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roundabout::env::{ACTION_DIM, OBS_DIM};
use roundabout::policy::{forward, load_weights, save_weights, MlpParameters};

fn main() -> roundabout::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let policy = MlpParameters::policy(OBS_DIM, ACTION_DIM, &mut rng)?;
    let path = std::env::temp_dir().join("roundabout_policy.bin");
    save_weights(&policy, &path)?;

    let bytes = fs::read(&path)?;
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let n_dims = u32_at(9) as usize;
    let dims: Vec<u32> = (0..n_dims).map(|k| u32_at(13 + 4 * k)).collect();
    println!(
        "{} bytes: magic {:?}, version {}, head {}, layer dims {:?}",
        bytes.len(),
        std::str::from_utf8(&bytes[..4]).unwrap(),
        u32_at(4),
        if bytes[8] == 0 { "gaussian" } else { "value" },
        dims
    );

    let back = load_weights(&path)?;
    let obs = [0.5; OBS_DIM];
    assert_eq!(forward(&back, &obs)?, forward(&policy, &obs)?);
    println!("reloaded policy gives identical mean action {:?}", forward(&back, &obs)?.mean);

    fs::write(&path, &bytes[..bytes.len() - 3])?;
    match load_weights(&path) {
        Err(e) => println!("truncated file rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
