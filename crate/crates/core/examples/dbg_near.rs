// scratch calibration probe — removed before release
use evlc::codec::build_codebook;
use evlc::framing::{build_packet, build_pilot_codebook};
use evlc::geometry::SceneConfig;
use evlc::receiver::{decode_packet_window, ReceiverConfig};
use evlc::sim::{generate_events, NoiseModel};
use evlc::Motion;
use rand::{Rng, SeedableRng};

fn main() {
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let rx = ReceiverConfig::default();
    let noise = NoiseModel { p_drop: 0.12, jitter_sigma_us: 25.0, bg_rate_hz_per_px: 3.0, ..NoiseModel::default() };
    for seed in 0..6u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 7919 + 13);
        let payload: Vec<bool> = (0..1152).map(|_| rng.gen()).collect();
        let (timelines, _) = build_packet(&payload, 16, &book, &pilots).unwrap();
        let scene = SceneConfig { distance_m: 10.0, blob_sigma_px: 0.4, ..SceneConfig::default() };
        let events = generate_events(&timelines, &scene, &Motion::default(), &noise, seed, 137).unwrap();
        match decode_packet_window(&events, &rx, 16, &book, &pilots) {
            Ok(d) => {
                let mut per_cluster = Vec::new();
                for (k, c) in d.clusters.iter().enumerate() {
                    let errs = c.bits.iter().zip(&payload[k*72..(k+1)*72]).filter(|(a,b)| a != b).count();
                    if errs > 0 { per_cluster.push((k, errs, c.lost_frames.clone())); }
                }
                println!("seed {seed}: sync {} errors {:?}", d.sync.packet_start_us, per_cluster);
            }
            Err(e) => println!("seed {seed}: LOST: {e}"),
        }
    }
}
