// Are a user's baskets more alike than baskets of different users?

use basketflow::eval::user_repetition_test;
use basketflow::synthetic::repeat_buyer_corpus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (label, exchangeable) in [("private pools", false), ("shared pool", true)] {
        let baskets = repeat_buyer_corpus(100, 20, 10, 500, 4, exchangeable, 7);
        let r = user_repetition_test(&baskets, 500, &mut rng).unwrap();
        println!(
            "{label:<14} same {:.4} diff {:.4}  t = {:>7.3}  df = {:>7.1}  p = {:.3e}",
            r.mean_same, r.mean_diff, r.t_stat, r.df, r.p_value
        );
    }
}
