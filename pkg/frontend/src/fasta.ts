// Minimal FASTA intake for the replacement-alignment editor. The server
// re-validates everything; this exists for the pre-submit length check.

import type { AlignmentRecord } from './types.js';

export function parseFastaRows(text: string): AlignmentRecord[] {
  const records: AlignmentRecord[] = [];
  let current: AlignmentRecord | null = null;
  for (const raw of text.split('\n')) {
    const line = raw.trim();
    if (!line) continue;
    if (line.startsWith('>')) {
      const id = line.slice(1).trim().split(/\s+/)[0];
      if (!id) throw new Error('header with no name');
      current = { id, residues: '' };
      records.push(current);
    } else {
      if (!current) throw new Error('sequence data before any ">" header');
      current.residues += line.toUpperCase();
    }
  }
  if (records.length === 0) throw new Error('no FASTA records found');
  const width = records[0].residues.length;
  for (const record of records) {
    if (record.residues.length === 0) {
      throw new Error(`record ${record.id} has no residues`);
    }
    if (record.residues.length !== width) {
      throw new Error(
        `rows have unequal lengths (${record.id}: ${record.residues.length}, ` +
          `expected ${width})`,
      );
    }
  }
  return records;
}
