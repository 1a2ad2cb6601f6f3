// Consensus-tree rendering: parse Newick with [&pp=...] annotations and
// lay it out as a rectangular SVG cladogram. Display logic only; the
// tree itself always comes from the API.

export interface TreeNode {
  name: string | null;
  length: number;
  pp: number | null;
  children: TreeNode[];
}

export function parseAnnotatedNewick(text: string): TreeNode {
  let pos = 0;
  const input = text.trim();

  function fail(message: string): never {
    throw new Error(`newick position ${pos}: ${message}`);
  }

  function parseNode(): TreeNode {
    const node: TreeNode = { name: null, length: 0, pp: null, children: [] };
    if (input[pos] === '(') {
      pos += 1;
      node.children.push(parseNode());
      while (input[pos] === ',') {
        pos += 1;
        node.children.push(parseNode());
      }
      if (input[pos] !== ')') fail("expected ')'");
      pos += 1;
    } else {
      const start = pos;
      while (pos < input.length && !'():,;['.includes(input[pos])) pos += 1;
      const name = input.slice(start, pos).trim();
      if (!name) fail('expected a taxon label');
      node.name = name;
    }
    if (input[pos] === '[') {
      const end = input.indexOf(']', pos);
      if (end < 0) fail("unterminated '[' comment");
      const match = /\[&pp=([0-9.eE+-]+)\]/.exec(input.slice(pos, end + 1));
      if (match) node.pp = Number(match[1]);
      pos = end + 1;
    }
    if (input[pos] === ':') {
      pos += 1;
      const start = pos;
      while (pos < input.length && !'(),;['.includes(input[pos])) pos += 1;
      node.length = Number(input.slice(start, pos));
      if (Number.isNaN(node.length)) fail('bad branch length');
    }
    return node;
  }

  const root = parseNode();
  if (input[pos] !== ';') fail("expected ';'");
  return root;
}

interface Placed {
  x: number;
  y: number;
  node: TreeNode;
}

export function renderCladogramSvg(
  newick: string,
  width = 520,
  rowHeight = 22,
): string {
  const root = parseAnnotatedNewick(newick);
  const leaves: Placed[] = [];
  const xs = new Map<TreeNode, number>();
  const ys = new Map<TreeNode, number>();

  let nextRow = 0;
  function place(node: TreeNode, x0: number): void {
    const x = x0 + node.length;
    xs.set(node, x);
    if (node.children.length === 0) {
      ys.set(node, nextRow);
      leaves.push({ x, y: nextRow, node });
      nextRow += 1;
      return;
    }
    for (const child of node.children) place(child, x);
    const rows = node.children.map((c) => ys.get(c)!);
    ys.set(node, rows.reduce((a, b) => a + b, 0) / rows.length);
  }
  place(root, 0);

  const maxX = Math.max(...leaves.map((l) => l.x), 1e-9);
  const labelSpace = 110;
  const plotWidth = width - labelSpace - 10;
  const height = Math.max(nextRow, 2) * rowHeight + 10;
  const sx = (x: number): number => 5 + (x / maxX) * plotWidth;
  const sy = (y: number): number => 15 + y * rowHeight;

  const parts: string[] = [];
  function draw(node: TreeNode): void {
    const x = xs.get(node)!;
    const y = ys.get(node)!;
    if (node.children.length > 0) {
      const childYs = node.children.map((c) => ys.get(c)!);
      const top = Math.min(...childYs);
      const bottom = Math.max(...childYs);
      parts.push(
        `<line x1="${sx(x).toFixed(1)}" y1="${sy(top).toFixed(1)}" ` +
          `x2="${sx(x).toFixed(1)}" y2="${sy(bottom).toFixed(1)}" class="edge"/>`,
      );
      for (const child of node.children) {
        const cy = ys.get(child)!;
        parts.push(
          `<line x1="${sx(x).toFixed(1)}" y1="${sy(cy).toFixed(1)}" ` +
            `x2="${sx(xs.get(child)!).toFixed(1)}" y2="${sy(cy).toFixed(1)}" class="edge"/>`,
        );
        draw(child);
      }
      if (node.pp !== null) {
        parts.push(
          `<text x="${sx(x).toFixed(1)}" y="${(sy(y) - 4).toFixed(1)}" class="pp">` +
            `${node.pp.toFixed(2)}</text>`,
        );
      }
    } else {
      parts.push(
        `<text x="${(sx(x) + 4).toFixed(1)}" y="${(sy(y) + 4).toFixed(1)}" class="leaf">` +
          `${escapeXml(node.name ?? '')}</text>`,
      );
    }
  }
  draw(root);

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `class="cladogram" role="img" aria-label="consensus tree">` +
    parts.join('') +
    '</svg>'
  );
}

export function escapeXml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}
