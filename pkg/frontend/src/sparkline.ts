// SVG sparkline for ER series (values on a fixed 0..100 scale): one point
// per snapshot, so a 16-snapshot ticket draws exactly 16 points.

export function sparkline(values: number[], width = 240, height = 48): string {
  if (values.length === 0) return '<svg class="sparkline" width="0" height="0"></svg>';
  const pad = 3;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = values.length > 1 ? innerW / (values.length - 1) : 0;
  const points = values
    .map((v, i) => {
      const x = pad + i * step;
      const y = pad + (1 - Math.min(100, Math.max(0, v)) / 100) * innerH;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
  const last = values[values.length - 1];
  const color = last >= 50 ? '#c0392b' : '#2c7a3f';
  const dots = points
    .split(' ')
    .map((p) => {
      const [x, y] = p.split(',');
      return `<circle cx="${x}" cy="${y}" r="1.8" fill="${color}"/>`;
    })
    .join('');
  return (
    `<svg class="sparkline" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">` +
    `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="1.5"/>` +
    dots +
    '</svg>'
  );
}

export function sparklinePointCount(svg: string): number {
  const match = svg.match(/polyline points="([^"]*)"/);
  if (!match) return 0;
  return match[1].split(' ').filter(Boolean).length;
}
