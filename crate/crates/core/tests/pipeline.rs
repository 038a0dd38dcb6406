//! End-to-end link tests: framing -> event channel -> receiver.

use evlc::codec::build_codebook;
use evlc::framing::{build_packet, build_pilot_codebook, PacketLayout};
use evlc::geometry::SceneConfig;
use evlc::receiver::{decode_packet_window, decode_stream, DecodeReport, ReceiverConfig};
use evlc::sim::{generate_events, NoiseModel};
use evlc::{Motion, Noise, Scene};
use rand::{Rng, SeedableRng};

fn random_payload(bits: usize, seed: u64) -> Vec<bool> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..bits).map(|_| rng.gen()).collect()
}

fn scene(distance_m: f64) -> Scene {
    SceneConfig {
        distance_m,
        ..SceneConfig::default()
    }
}

#[test]
fn ideal_channel_round_trip_16_clusters() {
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let layout = PacketLayout::default();
    let payload = random_payload(layout.capacity_bits(16), 11);
    let (timelines, header) = build_packet(&payload, 16, &book, &pilots).unwrap();
    assert_eq!(header.payload_bit_len, 1152);

    let scene = scene(30.0);
    let events = generate_events(
        &timelines,
        &scene,
        &Motion::default(),
        &Noise::default(),
        1,
        137,
    )
    .unwrap();
    assert!(!events.is_empty());

    let decode =
        decode_packet_window(&events, &ReceiverConfig::default(), 16, &book, &pilots).unwrap();
    assert!(decode.sync.packet_start_us.abs_diff(137) <= evlc::CHIP_US);

    let share = layout.bits_per_cluster();
    for (k, cluster) in decode.clusters.iter().enumerate() {
        assert!(cluster.lost_frames.is_empty(), "cluster {k} lost frames");
        assert_eq!(
            cluster.bits,
            payload[k * share..(k + 1) * share].to_vec(),
            "cluster {k} payload mismatch"
        );
    }
}

#[test]
fn ideal_channel_round_trip_single_cluster() {
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let payload = random_payload(72, 3);
    let (timelines, _) = build_packet(&payload, 1, &book, &pilots).unwrap();

    let scene = SceneConfig {
        n_leds: 6,
        leds_per_cluster: 6,
        distance_m: 20.0,
        ..SceneConfig::default()
    };
    let events = generate_events(
        &timelines,
        &scene,
        &Motion::default(),
        &Noise::default(),
        2,
        50,
    )
    .unwrap();
    let decode =
        decode_packet_window(&events, &ReceiverConfig::default(), 1, &book, &pilots).unwrap();
    assert_eq!(decode.clusters[0].bits, payload);
}

#[test]
fn stream_of_packets_reports_zero_ber() {
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let layout = PacketLayout::default();
    let per_packet = layout.capacity_bits(16);
    let n_packets = 2;
    let payload = random_payload(per_packet * n_packets, 7);

    let scene = scene(25.0);
    let mut events = Vec::new();
    for p in 0..n_packets {
        let slice = &payload[p * per_packet..(p + 1) * per_packet];
        let (timelines, _) = build_packet(slice, 16, &book, &pilots).unwrap();
        let start = 137 + p as u64 * layout.packet_duration_us();
        events.extend(
            generate_events(
                &timelines,
                &scene,
                &Motion::default(),
                &Noise::default(),
                p as u64,
                start,
            )
            .unwrap(),
        );
    }
    evlc::events::sort_events(&mut events);

    let stream = decode_stream(&events, &ReceiverConfig::default(), 16, &book, &pilots).unwrap();
    assert_eq!(stream.packets.len(), n_packets);
    assert_eq!(stream.lost_packets(), 0);

    let report = DecodeReport::from_stream(&stream, Some(&payload));
    for c in &report.clusters {
        assert_eq!(c.ber, Some(0.0), "cluster {}: {:?}", c.cluster_id, c.ber);
        assert_eq!(c.bits_compared, Some(144));
    }
}

#[test]
fn light_noise_still_error_free_at_30m() {
    let book = build_codebook();
    let pilots = build_pilot_codebook();
    let layout = PacketLayout::default();
    let payload = random_payload(layout.capacity_bits(16), 21);
    let (timelines, _) = build_packet(&payload, 16, &book, &pilots).unwrap();

    let noise = NoiseModel {
        p_drop: 0.05,
        jitter_sigma_us: 10.0,
        bg_rate_hz_per_px: 1.0,
        refractory_us: 50,
        ..NoiseModel::default()
    };
    let events = generate_events(&timelines, &scene(30.0), &Motion::default(), &noise, 5, 137)
        .unwrap();
    let decode =
        decode_packet_window(&events, &ReceiverConfig::default(), 16, &book, &pilots).unwrap();

    let share = layout.bits_per_cluster();
    let mut errors = 0usize;
    for (k, cluster) in decode.clusters.iter().enumerate() {
        errors += cluster
            .bits
            .iter()
            .zip(&payload[k * share..(k + 1) * share])
            .filter(|(a, b)| a != b)
            .count();
    }
    assert_eq!(errors, 0, "errors under light noise");
}
