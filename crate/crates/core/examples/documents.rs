//! Writing and reading state and channel documents.
use qrecover::channels::depolarizing_channel;
use qrecover::io::{channel_from_str, channel_to_string, load_state, save_state};
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let rho = random_state(&StateEnsembleSpec::new(Ensemble::BuresMixed, &[2, 2], 13).with_labels(&["L", "R"]))?;
    let path = std::env::temp_dir().join("qrecover_example_state.json");
    save_state(&rho, &path)?;
    let back = load_state(&path)?;
    println!("{} -> labels {:?}, identical {}", path.display(), back.labels(), back.matrix() == rho.matrix());

    let t = depolarizing_channel(rho.layout(), 0.2)?;
    let text = channel_to_string(&t);
    let t2 = channel_from_str(&text)?;
    println!("channel document {} bytes, {} Kraus ops after reading", text.len(), t2.kraus().len());
    Ok(())
}
