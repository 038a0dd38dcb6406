// scratch calibration probe — removed before release
use evlc::codec::build_codebook;
use evlc::framing::{build_packet, build_pilot_codebook};
use evlc::geometry::SceneConfig;
use evlc::receiver::{decode_packet_window, ReceiverConfig};
use evlc::sim::{generate_events, NoiseModel};
use evlc::Motion;
use rand::{Rng, SeedableRng};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let blob: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.4);
    let p_drop: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let jitter: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let bg: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let rx = ReceiverConfig { vibration_correction: std::env::var("NOVIB").is_err(), ..ReceiverConfig::default() };
    let noise = NoiseModel { p_drop, jitter_sigma_us: jitter, bg_rate_hz_per_px: bg, ..NoiseModel::default() };

    println!("blob {blob} p_drop {p_drop} jitter {jitter} bg {bg}");
    for &dist in &[10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0] {
        let mut errors = 0u64;
        let mut bits = 0u64;
        let mut lost = 0u32;
        for seed in 0..6u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 7919 + 13);
            let payload: Vec<bool> = (0..1152).map(|_| rng.gen()).collect();
            let (timelines, _) = build_packet(&payload, 16, &book, &pilots).unwrap();
            let scene = SceneConfig { distance_m: dist, blob_sigma_px: blob, ..SceneConfig::default() };
            let events = generate_events(&timelines, &scene, &Motion::default(), &noise, seed, 137).unwrap();
            match decode_packet_window(&events, &rx, 16, &book, &pilots) {
                Ok(d) => {
                    for (k, c) in d.clusters.iter().enumerate() {
                        bits += 72;
                        errors += c.bits.iter().zip(&payload[k * 72..(k + 1) * 72]).filter(|(a, b)| a != b).count() as u64;
                    }
                }
                Err(_) => { lost += 1; bits += 1152; errors += 576; }
            }
        }
        println!("  dist {dist:5}: errors {errors:5} / {bits} bits  lost {lost}");
    }
}
