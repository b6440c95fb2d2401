use dapac::analysis::measure;
use dapac::session::{run_session, Endpoint};
use dapac::net::ServerHost;
use dapac::server::Answer;
use dapac::{decode, generate_queries, AccessPolicy, Deployment, Rng, ServerState, SystemParams};
use num_rational::Ratio;
use proptest::prelude::*;
use std::sync::Arc;

fn params() -> impl Strategy<Value = SystemParams> {
    (2usize..=4, 2usize..=3, 1usize..=4).prop_map(|(n, k, m)| SystemParams::new(n, k, m * n * (n - 1) / 2).unwrap())
}

fn answers(dep: &Deployment, queries: &[dapac::Query]) -> Vec<Answer> {
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| ServerState::from_deployment(dep, i + 1).answer_query(q))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_user_decodes_own_message(p in params(), user in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let rng = Rng::labeled(seed, "prop");
        let mut dep = Deployment::new(p, &rng.substream("dealer", 0)).unwrap();
        let v = AccessPolicy::from_index(user.index(p.n_policies()), &p);
        let creds = dep.authority.issue_credentials(&v, &mut rng.substream("creds", 0)).unwrap();
        let (queries, plan) = generate_queries(&v, &creds, &p, &mut rng.substream("client", 0)).unwrap();
        let a = answers(&dep, &queries);
        prop_assert_eq!(&decode(&plan, &a, &p).unwrap(), dep.db.message(&v));
        let total: usize = a.iter().map(|x| x.items().len()).sum();
        prop_assert_eq!(total, p.total_equations());
        prop_assert_eq!(total * p.chunk_len_bits(), 2 * p.n_values() * p.msg_len_bits());
    }

    // Flipping one bit of the desired message flips exactly that decoded bit.
    #[test]
    fn decoding_is_linear_in_desired_message(p in params(), user in any::<prop::sample::Index>(), bit in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let rng = Rng::labeled(seed, "prop/flip");
        let mut dep = Deployment::new(p, &rng.substream("dealer", 0)).unwrap();
        let v = AccessPolicy::from_index(user.index(p.n_policies()), &p);
        let creds = dep.authority.issue_credentials(&v, &mut rng.substream("creds", 0)).unwrap();
        let bit = bit.index(p.msg_len_bits());
        let mut messages = dep.db.messages().to_vec();
        messages[v.index(&p)].bits_mut().flip(bit);
        let flipped = Deployment {
            db: Arc::new(dapac::MessageDatabase::from_messages(p, messages).unwrap()),
            ..dep.clone()
        };
        let (queries, plan) = generate_queries(&v, &creds, &p, &mut rng.substream("client", 0)).unwrap();
        let mut a = decode(&plan, &answers(&dep, &queries), &p).unwrap().into_bits();
        let b = decode(&plan, &answers(&flipped, &queries), &p).unwrap().into_bits();
        a.xor_in(&b).unwrap();
        prop_assert_eq!(a.count_ones(), 1);
        prop_assert!(a.get(bit));
    }
}

#[test]
fn golden_point_over_100_seeds() {
    let p = SystemParams::new(3, 2, 3).unwrap();
    for seed in 0..100 {
        let rng = Rng::labeled(seed, "golden");
        let mut dep = Deployment::new(p, &rng.substream("dealer", 0)).unwrap();
        let v = AccessPolicy::new(vec![1, 1, 1], &p).unwrap();
        let creds = dep.authority.issue_credentials(&v, &mut rng.substream("creds", 0)).unwrap();
        let endpoints: Vec<_> = (1..=3)
            .map(|i| Endpoint::Local(Arc::new(ServerHost::new(ServerState::from_deployment(&dep, i)))))
            .collect();
        let out = run_session(&v, &creds, &p, &endpoints, &mut rng.substream("client", 0)).unwrap();
        assert_eq!(&out.message, dep.db.message(&v));
        let m = measure(&out.transcript).unwrap();
        assert_eq!((m.rate, m.equations, m.download_bits), (Ratio::new(1, 4), 12, 12));
    }
}
