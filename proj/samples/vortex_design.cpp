// Build the block-quantized phase mask of a q-plate metasurface and report
// the azimuthal mode content of the transmitted beam for both spins.

#include <cstdio>

#include "spinorbit/spinorbit.hpp"

using namespace spinorbit;

int main()
{
    LayoutSpec spec;
    spec.winding = 1;
    std::printf("blocks: %zu\n", count_blocks(spec));
    for (int spin : {1, -1})
    {
        PhaseMask const mask = phase_mask(spec, spin, 512, MaskSampling::block);
        ComplexGrid const field = near_field(mask, Beam::gaussian(50000.0));
        OamSpectrum const s = oam_spectrum(field, 50000.0);
        IntensityGrid const ff = far_field(field);
        std::printf("spin %+d: dominant ell=%+d power=%.4f on-axis/peak=%.2e\n", spin,
                    s.dominant(), s.dominant_power(), ff.on_axis() / ff.peak());
    }
    return 0;
}
