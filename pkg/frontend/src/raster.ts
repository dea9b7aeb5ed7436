/** RGBA pixel canvas with the few primitives the charts need. */

import { GLYPH_HEIGHT, GLYPH_WIDTH, glyphFor } from "./font";
import { encodePng } from "./png";

export type Color = [number, number, number];

export const PALETTE: Color[] = [
  [31, 119, 180],
  [214, 39, 40],
  [44, 160, 44],
  [148, 103, 189],
  [255, 127, 14],
  [140, 86, 75],
  [227, 119, 194],
  [23, 190, 207],
];

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly pixels: Uint8Array;

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
    this.pixels = new Uint8Array(width * height * 4);
    this.clear([255, 255, 255]);
  }

  clear(color: Color): void {
    for (let i = 0; i < this.width * this.height; i++) {
      this.pixels[i * 4] = color[0];
      this.pixels[i * 4 + 1] = color[1];
      this.pixels[i * 4 + 2] = color[2];
      this.pixels[i * 4 + 3] = 255;
    }
  }

  set(x: number, y: number, color: Color): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (Math.round(y) * this.width + Math.round(x)) * 4;
    this.pixels[i] = color[0];
    this.pixels[i + 1] = color[1];
    this.pixels[i + 2] = color[2];
    this.pixels[i + 3] = 255;
  }

  fillRect(x0: number, y0: number, w: number, h: number, color: Color): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.set(x, y, color);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Color): void {
    // DDA with a 2x2 stamp so curves read at figure scale
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    for (let s = 0; s <= steps; s++) {
      const x = x0 + ((x1 - x0) * s) / steps;
      const y = y0 + ((y1 - y0) * s) / steps;
      this.set(x, y, color);
      this.set(x + 1, y, color);
      this.set(x, y + 1, color);
      this.set(x + 1, y + 1, color);
    }
  }

  marker(x: number, y: number, color: Color): void {
    this.fillRect(Math.round(x) - 2, Math.round(y) - 2, 5, 5, color);
  }

  text(x: number, y: number, s: string, color: Color): void {
    let cx = Math.round(x);
    for (const ch of s) {
      const rows = glyphFor(ch);
      for (let gy = 0; gy < GLYPH_HEIGHT; gy++) {
        for (let gx = 0; gx < GLYPH_WIDTH; gx++) {
          if (rows[gy][gx] === "1") {
            this.set(cx + gx, Math.round(y) + gy, color);
          }
        }
      }
      cx += GLYPH_WIDTH + 1;
    }
  }

  textWidth(s: string): number {
    return s.length * (GLYPH_WIDTH + 1);
  }

  toPng(): Buffer {
    return encodePng(this.width, this.height, this.pixels);
  }
}
