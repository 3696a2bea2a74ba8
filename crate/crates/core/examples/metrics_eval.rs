//! Evaluation metrics on hand-made inputs.

use latent_reach::metrics::{coherence, confusion_and_f1, diversity, mean_inference_time, safety_rate};

fn main() -> latent_reach::Result<()> {
    let predicted = [true, true, true, true, false, false, false, false, false, false];
    let truth = [true, true, true, false, true, false, false, false, false, false];
    println!("{}", serde_json::to_string(&confusion_and_f1(&predicted, &truth)?).unwrap());

    let before = [true; 4];
    let after = [false, false, true, false];
    println!("safety rate: {:?}", safety_rate(&before, &after)?);

    for text in ["the cat sat on the mat", "no no no no no"] {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        println!("diversity({text:?}) = {:.4}", diversity(&tokens));
    }
    println!("coherence = {:?}", coherence(&[1.0, 2.0], &[2.0, 1.0])?);
    println!("mean time = {}", mean_inference_time(&[0.8, 1.2, 1.0])?);
    Ok(())
}
