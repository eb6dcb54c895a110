/**
 * Theme palettes and caption styling.
 *
 * Both palettes are checked in tests against WCAG AA contrast (4.5:1) for
 * caption text, so color tweaks that regress readability fail the build.
 */

import type { PlayerSettings } from "./types.js";

export interface ThemePalette {
  name: "light" | "dark";
  pageBackground: string;
  captionBackground: string;
  captionText: string;
  accent: string;
}

export const LIGHT: ThemePalette = {
  name: "light",
  pageBackground: "#fafafa",
  captionBackground: "#ffffff",
  captionText: "#1a1a1a",
  accent: "#0b57d0",
};

export const DARK: ThemePalette = {
  name: "dark",
  pageBackground: "#101014",
  captionBackground: "#16161c",
  captionText: "#f2f2f5",
  accent: "#8ab4f8",
};

/** Caption font size at fontMagnification 1.0. */
export const BASE_CAPTION_PX = 16;

// Mirrors the engine's clamp range; the server already clamps, but the UI
// guards again so a hand-edited settings blob cannot produce absurd text.
const MAGNIFICATION_MIN = 0.5;
const MAGNIFICATION_MAX = 2.0;

function srgbChannel(hex: string, index: number): number {
  const raw = parseInt(hex.slice(1 + index * 2, 3 + index * 2), 16) / 255;
  return raw <= 0.04045 ? raw / 12.92 : Math.pow((raw + 0.055) / 1.055, 2.4);
}

/** WCAG relative luminance of a #rrggbb color. */
export function relativeLuminance(hex: string): number {
  if (!/^#[0-9a-fA-F]{6}$/.test(hex)) {
    throw new Error(`expected #rrggbb color, got ${hex}`);
  }
  return (
    0.2126 * srgbChannel(hex, 0) +
    0.7152 * srgbChannel(hex, 1) +
    0.0722 * srgbChannel(hex, 2)
  );
}

/** WCAG contrast ratio between two colors, in [1, 21]. */
export function contrastRatio(a: string, b: string): number {
  const la = relativeLuminance(a);
  const lb = relativeLuminance(b);
  const lighter = Math.max(la, lb);
  const darker = Math.min(la, lb);
  return (lighter + 0.05) / (darker + 0.05);
}

export function paletteFor(darkMode: boolean): ThemePalette {
  return darkMode ? DARK : LIGHT;
}

export interface CaptionStyle {
  fontSizePx: number;
  color: string;
  background: string;
  theme: "light" | "dark";
}

/**
 * Resolve the caption style for the current settings. Font size scales
 * linearly with fontMagnification, so 2.0 doubles the base size.
 */
export function captionStyle(
  settings: Pick<PlayerSettings, "fontMagnification" | "darkMode">,
): CaptionStyle {
  const magnification = Math.min(
    MAGNIFICATION_MAX,
    Math.max(MAGNIFICATION_MIN, settings.fontMagnification),
  );
  const palette = paletteFor(settings.darkMode);
  return {
    fontSizePx: BASE_CAPTION_PX * magnification,
    color: palette.captionText,
    background: palette.captionBackground,
    theme: palette.name,
  };
}
