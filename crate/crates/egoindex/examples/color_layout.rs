//! Compute the compact color-layout descriptor for a few images and watch
//! how it reacts: a flat image keeps only the three DC terms, while
//! gradients spill energy into the low-frequency AC coefficients.

use egoindex::descriptors::{color_layout, RgbImage};

fn show(name: &str, image: &RgbImage) {
    let cld = color_layout(image).unwrap();
    let fmt = |v: &[f64]| -> String {
        let parts: Vec<String> = v.iter().map(|x| format!("{:>7.1}", x)).collect();
        parts.join(" ")
    };
    println!("{:<18} Y  {}", name, fmt(&cld.y_coeffs));
    println!("{:<18} Cb {}", "", fmt(&cld.cb_coeffs));
    println!("{:<18} Cr {}", "", fmt(&cld.cr_coeffs));
    println!();
}

fn main() {
    let flat = RgbImage::filled(64, 64, [128, 128, 128]);
    show("flat gray", &flat);

    let mut horizontal = RgbImage::new(64, 64);
    for y in 0..64 {
        for x in 0..64 {
            let v = (x * 4) as u8;
            horizontal.set_pixel(x, y, [v, v, v]);
        }
    }
    show("left-to-right ramp", &horizontal);

    let mut warm_cool = RgbImage::new(64, 64);
    for y in 0..64 {
        for x in 0..64 {
            if y < 32 {
                warm_cool.set_pixel(x, y, [220, 120, 40]);
            } else {
                warm_cool.set_pixel(x, y, [40, 120, 220]);
            }
        }
    }
    show("warm over cool", &warm_cool);

    println!(
        "each row holds zigzag-ordered DCT coefficients of the 8x8 block \
         means; the first is the DC term, the rest are the lowest AC terms"
    );
}
