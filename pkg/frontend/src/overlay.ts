// Overlay compositing: the working mask (or a candidate) is tinted cyan at
// adjustable opacity on top of the micrograph. Mask pixels come straight
// from service PNGs.

export async function decodePng(bytes: Uint8Array): Promise<ImageBitmap> {
  const blob = new Blob([bytes.slice().buffer as ArrayBuffer], { type: "image/png" });
  return createImageBitmap(blob);
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  image: ImageBitmap,
  mask: ImageBitmap | null,
  opacity: number
): void {
  ctx.canvas.width = image.width;
  ctx.canvas.height = image.height;
  ctx.drawImage(image, 0, 0);
  if (!mask) return;

  const scratch = document.createElement("canvas");
  scratch.width = mask.width;
  scratch.height = mask.height;
  const sctx = scratch.getContext("2d")!;
  sctx.drawImage(mask, 0, 0);
  const data = sctx.getImageData(0, 0, scratch.width, scratch.height);
  const px = data.data;
  for (let i = 0; i < px.length; i += 4) {
    if (px[i] > 127) {
      px[i] = 0; // R
      px[i + 1] = 255; // G
      px[i + 2] = 255; // B
      px[i + 3] = Math.round(opacity * 255);
    } else {
      px[i + 3] = 0;
    }
  }
  sctx.putImageData(data, 0, 0);
  ctx.drawImage(scratch, 0, 0);
}
