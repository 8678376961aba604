use delpezzo::oracle::Method;
use delpezzo::torsor::verify_bijection;
use delpezzo::SurfaceId;

#[test]
fn torsor_images_equal_box_search_up_to_twelve() {
    for id in SurfaceId::ALL {
        for b in [1, 2, 5, 12] {
            let r = verify_bijection(id, b, Method::Exhaustive, 1).unwrap();
            assert!(r.ok(), "{r:?}");
        }
    }
}

#[test]
fn torsor_images_equal_projection_search() {
    for id in SurfaceId::ALL {
        for b in [10, 25, 50, 100, 500] {
            let r = verify_bijection(id, b, Method::Projection, 3).unwrap();
            assert!(r.ok(), "{id} B={b}: {r:?}");
            eprintln!("{id} B={b} N={}", r.torsor_count);
        }
    }
}
