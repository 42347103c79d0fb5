use doorsense_core::dataset::{
    decode_pgm, encode_pgm, map_from_pgm, map_to_pgm, parse_dataset, DatasetFile, ImageInfo,
};
use doorsense_core::{BBox, CellState, Detection, DoorStatus, GridFrame, GridMap, GroundTruthBox};
use proptest::prelude::*;

fn arb_map() -> impl Strategy<Value = GridMap> {
    (1usize..12, 1usize..12, 1u32..200, -50i32..50, -50i32..50).prop_flat_map(|(w, h, res, ox, oy)| {
        proptest::collection::vec(0u8..3, w * h).prop_map(move |v| {
            let cells = v
                .into_iter()
                .map(|k| [CellState::Free, CellState::Obstacle, CellState::Unknown][k as usize])
                .collect();
            let frame = GridFrame::new(w, h, res as f64 / 100.0, ox as f64 * 0.25, oy as f64 * 0.25).unwrap();
            GridMap::from_cells(frame, cells).unwrap()
        })
    })
}

fn arb_status() -> impl Strategy<Value = DoorStatus> {
    prop_oneof![Just(DoorStatus::Open), Just(DoorStatus::Closed)]
}

fn arb_dataset() -> impl Strategy<Value = DatasetFile> {
    proptest::collection::vec((10u32..500, 10u32..500), 0..4).prop_flat_map(|sizes| {
        let images: Vec<ImageInfo> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(w, h))| ImageInfo { image_id: format!("img{i}"), file_name: format!("{i}.png"), width: w, height: h })
            .collect();
        let n = images.len();
        let boxes = move || {
            (0..n.max(1), 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, arb_status())
        };
        let anns = proptest::collection::vec(boxes(), if n == 0 { 0..1 } else { 0..6 });
        let dets = proptest::collection::vec((boxes(), 0.0..=1.0f64), if n == 0 { 0..1 } else { 0..6 });
        (Just(images), anns, dets).prop_map(|(images, anns, dets)| {
            let place = |img: &ImageInfo, fx: f64, fy: f64, fw: f64, fh: f64| {
                let (w, h) = (img.width as f64, img.height as f64);
                let x = fx * w;
                let y = fy * h;
                BBox::new(x, y, fw * (w - x), fh * (h - y)).unwrap()
            };
            let annotations = anns
                .into_iter()
                .filter(|_| !images.is_empty())
                .map(|(i, fx, fy, fw, fh, label)| GroundTruthBox {
                    image_id: images[i].image_id.clone(),
                    bbox: place(&images[i], fx, fy, fw, fh),
                    label,
                })
                .collect();
            let detections = dets
                .into_iter()
                .filter(|_| !images.is_empty())
                .map(|((i, fx, fy, fw, fh, label), confidence)| Detection {
                    image_id: images[i].image_id.clone(),
                    bbox: place(&images[i], fx, fy, fw, fh),
                    label,
                    confidence,
                })
                .collect();
            DatasetFile { images, annotations, detections }
        })
    })
}

proptest! {
    #[test]
    fn pgm_round_trip(map in arb_map()) {
        let bytes = encode_pgm(&map_to_pgm(&map));
        let f = map.frame();
        let back = map_from_pgm(&decode_pgm(&bytes).unwrap(), f.resolution, [f.origin_x, f.origin_y]).unwrap();
        prop_assert_eq!(&back, &map);
        prop_assert_eq!(encode_pgm(&map_to_pgm(&back)), bytes);
    }

    #[test]
    fn dataset_round_trip(d in arb_dataset()) {
        let text = d.to_json();
        let back = parse_dataset(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.to_json(), text);
    }
}
