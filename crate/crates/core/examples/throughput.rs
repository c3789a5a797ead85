//! Times one forward and one adjoint application at the largest experiment
//! size (2480 x 480 image, 19 x 101 kernels).

use std::time::Instant;

use axialconv::{adjoint_h, forward_h, Image64, Stack64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let (m_t, n_t, m_r, n_r) = (2480, 480, 9, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = Image64::random(2 * m_r + 1, 2 * n_r + 1, &mut rng);
    let stack = Stack64::invariant(m_t, n_t, &k).unwrap();
    let xp = Image64::random(stack.m_p(), stack.n_p(), &mut rng);
    let r = Image64::random(m_t, n_t, &mut rng);

    let t = Instant::now();
    let y = forward_h(&stack, &xp).unwrap();
    let tf = t.elapsed();
    let t = Instant::now();
    let a = adjoint_h(&stack, &r).unwrap();
    let ta = t.elapsed();
    let gmacs = stack.mac_count() as f64 / 1e9;
    println!(
        "forward {:.3}s ({:.2} GMAC/s), adjoint {:.3}s ({:.2} GMAC/s), checksum {:.6e}",
        tf.as_secs_f64(),
        gmacs / tf.as_secs_f64(),
        ta.as_secs_f64(),
        gmacs / ta.as_secs_f64(),
        y.norm() + a.norm()
    );
}
