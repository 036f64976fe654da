/** Publish wizard: property plus contract details, one gateway call. */

import { html } from "./html.js";

export function renderPublishWizard(): string {
  return html`<section class="page publish">
    <h2>Publish an advertisement</h2>
    <form id="publish-form">
      <fieldset>
        <legend>Property</legend>
        <label>Kind
          <select name="kind">
            <option>HOUSE</option><option>APARTMENT</option><option>ROOM</option>
          </select>
        </label>
        <label>Typology <input name="typology" placeholder="T2 (apartments)" /></label>
        <label>Address details <input name="address_details" required /></label>
      </fieldset>
      <fieldset>
        <legend>Rental contract</legend>
        <label>Term
          <select name="term">
            <option>FIXED_TERM</option><option>MONTH_TO_MONTH</option>
            <option>SHORT_TERM</option><option>ROOM</option>
          </select>
        </label>
        <label>Start date <input name="initial_date" type="date" required /></label>
        <label>End date <input name="final_date" type="date" required /></label>
        <label>Conditions <textarea name="conditions"></textarea></label>
        <label>Monthly rent <input name="rent_amount" inputmode="decimal" required /></label>
        <label>Payment deadline (hours)
          <input name="deadline_hours" value="48" inputmode="numeric" />
        </label>
      </fieldset>
      <button data-action="publish">Sign and publish</button>
    </form>
  </section>`;
}
