//! One cell, eight particles: field gather as a sum of 8x8 outer products,
//! checked against the direct per-particle triple sum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilepic::domain::{FieldSet, PackedEB};
use tilepic::kernels::{
    build_grid_field_matrix, build_weight_matrix, gather_scalar_at, interpolate_batch, InterpBatch,
};
use tilepic::shape::ShapeOrder;

fn main() -> tilepic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fields = FieldSet::new([8; 3], 3);
    for v in [&mut fields.e, &mut fields.b] {
        for c in &mut v.comp {
            c.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
    }
    let mut packed = PackedEB::default();
    fields.pack_eb(&mut packed);

    let cell = [3, 4, 2];
    let fracs: Vec<[f64; 3]> = (0..8)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    for order in [ShapeOrder::Linear, ShapeOrder::Quadratic, ShapeOrder::Cubic] {
        let mut batch = InterpBatch::new(order);
        build_weight_matrix(&[cell; 8], &fracs, &mut batch)?;
        build_grid_field_matrix(cell, &packed, &mut batch, 0)?;
        interpolate_batch(&mut batch);
        let mut worst = 0.0f64;
        for (p, frac) in fracs.iter().enumerate() {
            let (e, b) = gather_scalar_at(cell, *frac, &fields, order, p as u64)?;
            let (eb, bb) = batch.result(p);
            for c in 0..3 {
                worst = worst.max((e[c] - eb[c]).abs()).max((b[c] - bb[c]).abs());
            }
        }
        println!(
            "order {}: W is 8x{}, {} outer-product updates, max |batched - direct| = {worst:.2e}",
            order.as_u8(),
            batch.k(),
            batch.k()
        );
        let (e, _) = batch.result(0);
        println!(
            "  particle 0: E = [{:+.6}, {:+.6}, {:+.6}]",
            e[0], e[1], e[2]
        );
    }
    Ok(())
}
