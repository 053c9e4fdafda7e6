//! The published one-shot instance: a Miles Davis → Bebop → Jazz path.

use kgllm_core::ingest::Lexicon;
use kgllm_core::promptgen::{Icl, IclExample, PromptBuilder, Style, Task};
use kgllm_core::sampler::{label_instance, paths_from_root, PathInstance, PathOptions, Split};
use kgllm_core::{KnowledgeGraph, NodeId, RelationId, Triple};

pub const LINK_ABLATION: &str = include_str!("../golden/link_ablation.txt");
pub const LINK_KGLLM: &str = include_str!("../golden/link_kgllm.txt");
pub const RELATION_ABLATION: &str = include_str!("../golden/relation_ablation.txt");
pub const RELATION_KGLLM: &str = include_str!("../golden/relation_kgllm.txt");

pub const E: usize = 47_406;
pub const R: usize = 181;

pub fn lexicon() -> Lexicon {
    Lexicon::empty(E, R)
        .with_entity(47405, "Miles Davis", Some("Miles Davis music artist"))
        .with_entity(46497, "Bebop", None)
        .with_entity(46501, "Jazz", None)
        .with_relation(179, "music_artist_genre", Some("is associated with genre"))
        .with_relation(180, "music_genre_parent_genre", Some("genre is under the broader genre"))
}

pub fn sampled_instance() -> PathInstance {
    let g = KnowledgeGraph::build(
        E,
        R,
        [
            Triple::new(47405, 179, 46497),
            Triple::new(46497, 180, 46501),
            Triple::new(47405, 179, 46501),
        ],
    )
    .unwrap();
    let (paths, truncated) = paths_from_root(&g, NodeId(47405), &PathOptions::uncapped(2, 6));
    assert!(!truncated);
    let path = paths
        .into_iter()
        .find(|p| p.nodes == [NodeId(47405), NodeId(46497), NodeId(46501)])
        .expect("2-hop path enumerated");
    label_instance(&g, path, "train-0000000".into(), Split::Train).unwrap()
}

pub fn block(task: Task, style: Style) -> String {
    let lex = lexicon();
    let inst = sampled_instance();
    let record = PromptBuilder::new(&lex, task, style, &[RelationId(179), RelationId(180)])
        .record(&inst, Icl::None)
        .unwrap();
    IclExample { record }.block()
}
