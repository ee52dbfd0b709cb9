/**
 * Raster payload codecs: base64 of row-major bytes, one byte per pixel for
 * masks (probability quantized to 0-255), three bytes per pixel for RGB.
 */

import { ProtocolError } from "./framing.js";

export interface MaskRaster {
  width: number;
  height: number;
  /** row-major, one byte per pixel, 0-255 = probability * 255 */
  data: Uint8Array;
}

export interface RgbRaster {
  width: number;
  height: number;
  /** row-major, three bytes per pixel */
  data: Uint8Array;
}

export function encodeMask(mask: MaskRaster): string {
  if (mask.data.length !== mask.width * mask.height) {
    throw new ProtocolError(
      `mask has ${mask.data.length} bytes for ${mask.width}x${mask.height}`,
    );
  }
  return Buffer.from(mask.data).toString("base64");
}

export function decodeMask(data: string, height: number, width: number): MaskRaster {
  const bytes = Buffer.from(data, "base64");
  if (bytes.length !== width * height) {
    throw new ProtocolError(
      `mask payload has ${bytes.length} bytes, expected ${width * height}`,
    );
  }
  return { width, height, data: new Uint8Array(bytes) };
}

export function encodeRgb(rgb: RgbRaster): string {
  if (rgb.data.length !== rgb.width * rgb.height * 3) {
    throw new ProtocolError(
      `rgb has ${rgb.data.length} bytes for ${rgb.width}x${rgb.height}`,
    );
  }
  return Buffer.from(rgb.data).toString("base64");
}

export function decodeRgb(data: string, height: number, width: number): RgbRaster {
  const bytes = Buffer.from(data, "base64");
  if (bytes.length !== width * height * 3) {
    throw new ProtocolError(
      `rgb payload has ${bytes.length} bytes, expected ${width * height * 3}`,
    );
  }
  return { width, height, data: new Uint8Array(bytes) };
}
