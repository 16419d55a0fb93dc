/** Canvas stroke capture with pointer events.
 *
 * Points are recorded in canvas backing-store pixels (device pixels); the
 * service does all geometric normalization.
 */

import type { Point, Stroke } from "./wire.js";

export interface Pad {
  redraw(strokes: readonly Stroke[]): void;
  detach(): void;
}

export function attachPad(
  canvas: HTMLCanvasElement,
  onStroke: (stroke: Stroke) => void,
  onPenMove?: () => void,
): Pad {
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("2d canvas context unavailable");
  }
  const dpr = window.devicePixelRatio || 1;
  const rect = canvas.getBoundingClientRect();
  canvas.width = Math.max(1, Math.round(rect.width * dpr));
  canvas.height = Math.max(1, Math.round(rect.height * dpr));
  ctx.lineWidth = 2 * dpr;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  ctx.strokeStyle = "#1a1a1a";
  ctx.fillStyle = "#1a1a1a";

  let current: Point[] | null = null;

  const toPoint = (ev: PointerEvent): Point => [ev.offsetX * dpr, ev.offsetY * dpr];

  const drawSegment = (from: Point, to: Point) => {
    ctx.beginPath();
    ctx.moveTo(from[0], from[1]);
    ctx.lineTo(to[0], to[1]);
    ctx.stroke();
  };

  const drawDot = (p: Point) => {
    ctx.beginPath();
    ctx.arc(p[0], p[1], ctx.lineWidth / 2, 0, Math.PI * 2);
    ctx.fill();
  };

  const down = (ev: PointerEvent) => {
    ev.preventDefault();
    canvas.setPointerCapture(ev.pointerId);
    current = [toPoint(ev)];
  };

  const move = (ev: PointerEvent) => {
    if (current === null) {
      return;
    }
    const p = toPoint(ev);
    const last = current[current.length - 1];
    if (last !== undefined) {
      drawSegment(last, p);
    }
    current.push(p);
    onPenMove?.();
  };

  const up = (ev: PointerEvent) => {
    if (current === null) {
      return;
    }
    canvas.releasePointerCapture(ev.pointerId);
    const stroke = current;
    current = null;
    if (stroke.length === 1) {
      const only = stroke[0];
      if (only !== undefined) {
        drawDot(only);
      }
    }
    onStroke(stroke);
  };

  canvas.addEventListener("pointerdown", down);
  canvas.addEventListener("pointermove", move);
  canvas.addEventListener("pointerup", up);
  canvas.addEventListener("pointercancel", up);

  return {
    redraw(strokes: readonly Stroke[]) {
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      for (const stroke of strokes) {
        const first = stroke[0];
        if (first === undefined) {
          continue;
        }
        if (stroke.length === 1) {
          drawDot(first);
          continue;
        }
        ctx.beginPath();
        ctx.moveTo(first[0], first[1]);
        for (const p of stroke.slice(1)) {
          ctx.lineTo(p[0], p[1]);
        }
        ctx.stroke();
      }
    },
    detach() {
      canvas.removeEventListener("pointerdown", down);
      canvas.removeEventListener("pointermove", move);
      canvas.removeEventListener("pointerup", up);
      canvas.removeEventListener("pointercancel", up);
    },
  };
}
