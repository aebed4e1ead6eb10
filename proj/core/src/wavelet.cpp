#include "shiftsr/wavelet.hpp"

#include "shiftsr/errors.hpp"

namespace shiftsr {

using nn::Shape;
using nn::Tensor;

WaveletSubbands dwt2(const Tensor& x) {
    const Shape s = x.shape;
    if (s.h % 2 != 0 || s.w % 2 != 0)
        throw ShapeError("dwt2: spatial dims must be even, got " + s.str());
    const Shape half{s.n, s.c, s.h / 2, s.w / 2};
    WaveletSubbands sb{Tensor(half), Tensor(half), Tensor(half), Tensor(half)};
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h / 2; ++y)
                for (int w = 0; w < s.w / 2; ++w) {
                    const double a = x.at(n, c, 2 * y, 2 * w);
                    const double b = x.at(n, c, 2 * y, 2 * w + 1);
                    const double cc = x.at(n, c, 2 * y + 1, 2 * w);
                    const double d = x.at(n, c, 2 * y + 1, 2 * w + 1);
                    sb.ll.at(n, c, y, w) = 0.5 * (a + b + cc + d);
                    sb.lh.at(n, c, y, w) = 0.5 * (a - b + cc - d);
                    sb.hl.at(n, c, y, w) = 0.5 * (a + b - cc - d);
                    sb.hh.at(n, c, y, w) = 0.5 * (a - b - cc + d);
                }
    return sb;
}

Tensor idwt2(const WaveletSubbands& sb) {
    nn::check_same_shape(sb.ll, sb.lh, "idwt2");
    nn::check_same_shape(sb.ll, sb.hl, "idwt2");
    nn::check_same_shape(sb.ll, sb.hh, "idwt2");
    const Shape h = sb.ll.shape;
    Tensor out(Shape{h.n, h.c, 2 * h.h, 2 * h.w});
    for (int n = 0; n < h.n; ++n)
        for (int c = 0; c < h.c; ++c)
            for (int y = 0; y < h.h; ++y)
                for (int w = 0; w < h.w; ++w) {
                    const double ll = sb.ll.at(n, c, y, w);
                    const double lh = sb.lh.at(n, c, y, w);
                    const double hl = sb.hl.at(n, c, y, w);
                    const double hh = sb.hh.at(n, c, y, w);
                    out.at(n, c, 2 * y, 2 * w) = 0.5 * (ll + lh + hl + hh);
                    out.at(n, c, 2 * y, 2 * w + 1) = 0.5 * (ll - lh + hl - hh);
                    out.at(n, c, 2 * y + 1, 2 * w) = 0.5 * (ll + lh - hl - hh);
                    out.at(n, c, 2 * y + 1, 2 * w + 1) = 0.5 * (ll - lh - hl + hh);
                }
    return out;
}

}  // namespace shiftsr
