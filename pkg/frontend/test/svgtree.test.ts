import { describe, expect, test } from 'vitest';

import { parseAnnotatedNewick, renderCladogramSvg } from '../src/svgtree.js';

const CONSENSUS =
  '(ape:0.1,(bee:0.2,cat:0.3)[&pp=0.97]:0.05,dog:0.4);';

describe('annotated newick parsing', () => {
  test('reads names, lengths, and posterior annotations', () => {
    const root = parseAnnotatedNewick(CONSENSUS);
    expect(root.children).toHaveLength(3);
    const inner = root.children[1];
    expect(inner.pp).toBeCloseTo(0.97);
    expect(inner.length).toBeCloseTo(0.05);
    expect(inner.children.map((c) => c.name)).toEqual(['bee', 'cat']);
  });

  test('star tree has no annotations', () => {
    const root = parseAnnotatedNewick('(a:0.1,b:0.2,c:0.3,d:0.4);');
    expect(root.children).toHaveLength(4);
    expect(root.children.every((c) => c.pp === null)).toBe(true);
  });

  test('multifurcating consensus parses', () => {
    const root = parseAnnotatedNewick(
      '(a:0.1,b:0.1,(c:0.1,d:0.1,e:0.1)[&pp=0.6]:0.2);',
    );
    expect(root.children[2].children).toHaveLength(3);
  });

  test('malformed input throws with a position', () => {
    expect(() => parseAnnotatedNewick('(a:0.1,b:0.2')).toThrow(/position/);
    expect(() => parseAnnotatedNewick('(a:0.1,:0.2);')).toThrow(/label/);
  });
});

describe('cladogram svg', () => {
  test('contains every leaf label and the pp note', () => {
    const svg = renderCladogramSvg(CONSENSUS);
    for (const name of ['ape', 'bee', 'cat', 'dog']) {
      expect(svg).toContain(`>${name}</text>`);
    }
    expect(svg).toContain('class="pp">0.97</text>');
    expect(svg.startsWith('<svg')).toBe(true);
    expect(svg.endsWith('</svg>')).toBe(true);
  });

  test('escapes nothing dangerous into markup', () => {
    const svg = renderCladogramSvg('(a:0.1,b:0.2,c:0.3);');
    expect(svg).not.toContain('<script');
  });

  test('deterministic output', () => {
    expect(renderCladogramSvg(CONSENSUS)).toBe(renderCladogramSvg(CONSENSUS));
  });
});
