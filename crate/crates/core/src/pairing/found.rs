use alloc::vec::Vec;

use super::{find_leaves, Matcher, PairLink, PairSource};
use crate::world::WorldInstance;

/// Links between `find` leaves of distinct questions on one passage whose
/// arguments are equivalent, ordered by `(id_a, id_b, path_a, path_b)`.
pub fn find_natural_pairs(world: &WorldInstance, matcher: &Matcher) -> Vec<PairLink> {
    let mut questions: Vec<_> = world.questions.iter().filter(|q| !q.is_probe).collect();
    questions.sort_by(|a, b| a.id.cmp(&b.id));
    let leaves: Vec<_> = questions.iter().map(|q| find_leaves(q)).collect();
    let mut links = Vec::new();
    for i in 0..questions.len() {
        for j in i + 1..questions.len() {
            for (pa, arg_a) in &leaves[i] {
                for (pb, arg_b) in &leaves[j] {
                    if matcher.similarity(arg_a, arg_b).equivalent {
                        links.push(PairLink::new(&questions[i].id, pa.clone(), &questions[j].id, pb.clone(), PairSource::Found));
                    }
                }
            }
        }
    }
    links.sort_by(|x, y| {
        (&x.example_a, &x.example_b, &x.path_a, &x.path_b).cmp(&(&y.example_a, &y.example_b, &y.path_a, &y.path_b))
    });
    links
}
