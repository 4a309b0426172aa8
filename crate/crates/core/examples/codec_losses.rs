//! Encodes village frames, drops one packet of an early P-frame and follows
//! the corruption through later frames that reference it.
//!
//! cargo run --example codec_losses [out_dir]

use statecast::codec::{encode, pixel_loss_rate, CodecConfig, Decoder, FrameKind};
use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::scene::render_ground_truth;

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-codec"), Into::into);
    std::fs::create_dir_all(&out)?;
    let mut opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    opts.frames = 12;
    let scene = fixtures::village_toy(&opts);
    let frames = (0..opts.frames).map(|f| render_ground_truth(&scene, f)).collect::<statecast::Result<Vec<_>>>()?;
    let codec = CodecConfig { gop: 10, ..CodecConfig::default() };
    let (encoded, _) = encode(&frames, &codec)?;

    let mut decoder = Decoder::new();
    for ef in &encoded {
        let mut packets = ef.packets();
        if ef.frame_index == 3 {
            let mid = packets.len() / 2;
            packets[mid].lost = true;
        }
        let (_, mask) = decoder.decode(ef, &packets)?;
        mask.save(out.join(format!("mask_{:02}.pgm", ef.frame_index)))?;
        println!(
            "frame {:>2} {:?}: {:>2} packets, {:>6} bytes, pixel loss {:>5.1}%",
            ef.frame_index,
            ef.kind,
            packets.len(),
            ef.total_bytes(),
            100.0 * pixel_loss_rate(&mask)
        );
        if ef.kind == FrameKind::I && ef.frame_index > 0 {
            println!("          the I-frame stops the propagation");
        }
    }
    println!("masks in {} (white = decoded correctly)", out.display());
    Ok(())
}
