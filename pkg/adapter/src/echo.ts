/**
 * The echo model: the simplest possible backend, useful for wiring checks.
 * DETECT returns a flat 0.5 mask, PROPAGATE returns the reference mask
 * unchanged (an identity propagator), ESTIMATE returns 0.5.
 */

import type { Handlers } from "./worker.js";
import type { MaskRaster } from "./rasters.js";

export const echoHandlers: Handlers<null> = {
  detect: ({ frame }): MaskRaster => ({
    width: frame.width,
    height: frame.height,
    data: new Uint8Array(frame.width * frame.height).fill(128),
  }),
  propagate: ({ referenceMask }): MaskRaster => referenceMask,
  estimate: () => 0.5,
};
